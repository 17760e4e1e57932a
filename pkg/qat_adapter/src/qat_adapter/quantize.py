"""Per-tensor asymmetric fake quantization with restricted ranges.

PyTorch's native machinery handles 8-bit quantization; narrower widths are
expressed by restricting the observer's allowed integer range to
[0, 2^bits - 1].  Activations track running min/max with a moving average;
weights use plain min/max.  Both stay per-tensor affine, matching the
asymmetric scheme the training engine assumes.
"""

from __future__ import annotations

import torch
from torch.ao.quantization import FakeQuantize, MinMaxObserver, MovingAverageMinMaxObserver


def activation_fake_quant(bits: int) -> FakeQuantize:
    if not 2 <= bits <= 8:
        raise ValueError(f"activation bits {bits} outside [2, 8]")
    return FakeQuantize(
        observer=MovingAverageMinMaxObserver,
        quant_min=0,
        quant_max=2 ** bits - 1,
        dtype=torch.quint8,
        qscheme=torch.per_tensor_affine,
        reduce_range=False,
    )


def weight_fake_quant(bits: int) -> FakeQuantize:
    if not 2 <= bits <= 8:
        raise ValueError(f"weight bits {bits} outside [2, 8]")
    return FakeQuantize(
        observer=MinMaxObserver,
        quant_min=0,
        quant_max=2 ** bits - 1,
        dtype=torch.quint8,
        qscheme=torch.per_tensor_affine,
        reduce_range=False,
    )


def fold_batchnorm(conv: torch.nn.Conv2d, bn: torch.nn.BatchNorm2d) -> tuple[torch.Tensor, torch.Tensor]:
    """Fuse a trained BatchNorm into the preceding conv's weight and bias."""
    sigma = torch.sqrt(bn.running_var + bn.eps)
    scale = bn.weight / sigma
    weight = conv.weight * scale.reshape(-1, 1, 1, 1)
    bias = conv.bias if conv.bias is not None else torch.zeros(conv.out_channels)
    bias = (bias - bn.running_mean) * scale + bn.bias
    return weight.detach().clone(), bias.detach().clone()
