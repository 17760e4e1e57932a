"""Scriptable accuracy-oracle double for protocol tests.

Speaks one JSON record per line on stdin/stdout.  Behavior flags:

    --top1 X        respond with a fixed accuracy (default 0.5)
    --die-after N   exit abruptly after N responses
    --stale-first   before each real response, emit one response with a bogus id
    --garbage-first emit one non-JSON line before the first response
"""

import argparse
import json
import sys


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--top1", type=float, default=0.5)
    parser.add_argument("--die-after", type=int, default=None)
    parser.add_argument("--stale-first", action="store_true")
    parser.add_argument("--garbage-first", action="store_true")
    args = parser.parse_args()

    answered = 0
    emitted_garbage = False
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        if args.garbage_first and not emitted_garbage:
            print("this is not json", flush=True)
            emitted_garbage = True
        if args.stale_first:
            print(json.dumps({"id": 999_999, "status": "ok", "top1": 0.0}), flush=True)
        print(json.dumps({"id": request["id"], "status": "ok", "top1": args.top1}), flush=True)
        answered += 1
        if args.die_after is not None and answered >= args.die_after:
            sys.exit(1)


if __name__ == "__main__":
    main()
