import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qat_adapter.training import pretrain_checkpoint


@pytest.fixture(scope="session")
def checkpoint_path(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("ckpt") / "tinycnn.pt"
    pretrain_checkpoint(path, seed=0)
    return path


@pytest.fixture(scope="session")
def checkpoint(checkpoint_path):
    import torch

    return torch.load(checkpoint_path, weights_only=True)
