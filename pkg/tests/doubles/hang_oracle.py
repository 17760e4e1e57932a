"""Oracle double that reads requests and never answers (timeout tests)."""

import sys
import time

for _ in sys.stdin:
    time.sleep(3600)
