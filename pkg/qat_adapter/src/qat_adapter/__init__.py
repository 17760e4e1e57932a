"""Reference accuracy oracle: fake-quantized fine-tuning behind a JSON-lines protocol."""

__version__ = "0.1.0"

from .model import GENOME_LENGTH, NETWORK_NAME, QuantNet, ReferenceNet
from .training import evaluate_genome, pretrain_checkpoint

__all__ = [
    "GENOME_LENGTH",
    "NETWORK_NAME",
    "QuantNet",
    "ReferenceNet",
    "evaluate_genome",
    "pretrain_checkpoint",
]
