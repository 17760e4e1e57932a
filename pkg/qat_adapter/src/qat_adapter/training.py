"""Reference training recipe: float pretraining, 8-bit adaptation, and the
per-request calibrate / fine-tune / evaluate path.

The recipe is deliberately small (a few epochs of Adam on the synthetic
smoke set) and documents itself here; it makes no fidelity claim to any
published training budget.  Every entry point reseeds torch, so identical
requests produce identical answers regardless of order.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import torch
from torch import nn

from .data import SmokeData, make_dataset
from .model import GENOME_LENGTH, NETWORK_NAME, QuantNet, ReferenceNet

log = logging.getLogger(__name__)

FP32_EPOCHS = 4
QAT8_EPOCHS = 3
FINE_TUNE_LR = 5e-4


def _seed_everything(seed: int) -> None:
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)


def _train(model: nn.Module, data: SmokeData, epochs: int, lr: float) -> None:
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    model.train()
    for _ in range(epochs):
        for x, y in data.train_batches:
            optimizer.zero_grad()
            loss_fn(model(x), y).backward()
            optimizer.step()


def _top1(model: nn.Module, x: torch.Tensor, y: torch.Tensor) -> float:
    model.eval()
    with torch.no_grad():
        predictions = model(x).argmax(dim=1)
    return (predictions == y).float().mean().item()


def calibrate(model: QuantNet, data: SmokeData) -> None:
    """One deterministic pass over the calibration split to set observer ranges."""
    model.train()  # observers update in train mode
    with torch.no_grad():
        for batch in data.calib_x.split(64):
            model(batch)


def evaluate_genome(
    weights: dict[str, torch.Tensor],
    genome: list[int],
    data: SmokeData,
    epochs: int,
    seed: int,
) -> float:
    """Build the fake-quantized net for one genome, fine-tune, report top-1."""
    _seed_everything(seed)
    model = QuantNet(genome)
    model.load_fused_weights(weights)
    calibrate(model, data)
    if epochs > 0:
        _train(model, data, epochs, FINE_TUNE_LR)
    return _top1(model, data.val_x, data.val_y)


def pretrain_checkpoint(path: Path, seed: int = 0) -> dict:
    """Train the reference model and store both starting points plus the
    uniform-8, zero-epoch validation metric the protocol smoke test pins."""
    _seed_everything(seed)
    data = make_dataset(seed)

    reference = ReferenceNet()
    _train(reference, data, FP32_EPOCHS, lr=1e-3)
    fp32_weights = reference.fused_weights()
    fp32_top1 = _top1(reference, data.val_x, data.val_y)
    log.info("fp32 reference top-1: %.4f", fp32_top1)

    _seed_everything(seed + 1)
    qat8 = QuantNet([8] * GENOME_LENGTH)
    qat8.load_fused_weights(fp32_weights)
    calibrate(qat8, data)
    _train(qat8, data, QAT8_EPOCHS, lr=FINE_TUNE_LR)
    qat8_weights = qat8.export_fused_weights()

    val_top1 = evaluate_genome(qat8_weights, [8] * GENOME_LENGTH, data, epochs=0, seed=seed)
    log.info("qat-8 checkpoint top-1 (e=0 path): %.4f", val_top1)

    checkpoint = {
        "network": NETWORK_NAME,
        "seed": seed,
        "fp32_weights": fp32_weights,
        "qat8_weights": qat8_weights,
        "fp32_top1": fp32_top1,
        "val_top1": val_top1,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(checkpoint, path)
    return checkpoint


def main(argv: list[str] | None = None) -> None:
    import argparse

    parser = argparse.ArgumentParser(description="train the smoke checkpoint")
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    checkpoint = pretrain_checkpoint(Path(args.out), args.seed)
    print(f"saved {args.out}: val_top1={checkpoint['val_top1']:.4f}", file=sys.stderr)


if __name__ == "__main__":
    main()
