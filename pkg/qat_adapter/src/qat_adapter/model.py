"""The smoke-test CNN: three quantizable layers (conv, conv, linear).

``ReferenceNet`` is the float training form with batch norm.  ``QuantNet``
is the deployed form: batch norm folded away, a fake-quantization stage on
the input, after every activation, and on each layer's weights.  The genome
convention matches the search engine: per layer one (activation-in,
weight) bit pair; a layer's output quantization is the next layer's input;
the final outputs are pinned to 8 bits.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from .quantize import activation_fake_quant, fold_batchnorm, weight_fake_quant

NETWORK_NAME = "tinycnn"
QUANTIZABLE_LAYERS = 3
GENOME_LENGTH = 2 * QUANTIZABLE_LAYERS
LAST_OUTPUT_BITS = 8


class ReferenceNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 8, 3, stride=2, padding=1)
        self.bn1 = nn.BatchNorm2d(8)
        self.conv2 = nn.Conv2d(8, 16, 3, stride=2, padding=1)
        self.bn2 = nn.BatchNorm2d(16)
        self.fc = nn.Linear(16 * 4 * 4, 10)

    def forward(self, x):
        x = F.relu(self.bn1(self.conv1(x)))
        x = F.relu(self.bn2(self.conv2(x)))
        return self.fc(torch.flatten(x, 1))

    def fused_weights(self) -> dict[str, torch.Tensor]:
        w1, b1 = fold_batchnorm(self.conv1, self.bn1)
        w2, b2 = fold_batchnorm(self.conv2, self.bn2)
        return {
            "conv1.weight": w1, "conv1.bias": b1,
            "conv2.weight": w2, "conv2.bias": b2,
            "fc.weight": self.fc.weight.detach().clone(),
            "fc.bias": self.fc.bias.detach().clone(),
        }


class QuantNet(nn.Module):
    """Batch-norm-free net with per-layer fake quantization."""

    def __init__(self, genome: list[int]):
        super().__init__()
        if len(genome) != GENOME_LENGTH:
            raise ValueError(f"genome length {len(genome)} != {GENOME_LENGTH}")
        act = [genome[0], genome[2], genome[4], LAST_OUTPUT_BITS]
        wgt = [genome[1], genome[3], genome[5]]
        self.conv1 = nn.Conv2d(3, 8, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(8, 16, 3, stride=2, padding=1)
        self.fc = nn.Linear(16 * 4 * 4, 10)
        self.input_fq = activation_fake_quant(act[0])
        self.act1_fq = activation_fake_quant(act[1])
        self.act2_fq = activation_fake_quant(act[2])
        self.out_fq = activation_fake_quant(act[3])
        self.w1_fq = weight_fake_quant(wgt[0])
        self.w2_fq = weight_fake_quant(wgt[1])
        self.w3_fq = weight_fake_quant(wgt[2])

    def forward(self, x):
        x = self.input_fq(x)
        x = F.relu(F.conv2d(x, self.w1_fq(self.conv1.weight), self.conv1.bias,
                            stride=2, padding=1))
        x = self.act1_fq(x)
        x = F.relu(F.conv2d(x, self.w2_fq(self.conv2.weight), self.conv2.bias,
                            stride=2, padding=1))
        x = self.act2_fq(x)
        x = torch.flatten(x, 1)
        x = F.linear(x, self.w3_fq(self.fc.weight), self.fc.bias)
        return self.out_fq(x)

    def load_fused_weights(self, weights: dict[str, torch.Tensor]) -> None:
        with torch.no_grad():
            for name, tensor in weights.items():
                module_name, param = name.split(".")
                getattr(getattr(self, module_name), param).copy_(tensor)

    def export_fused_weights(self) -> dict[str, torch.Tensor]:
        return {
            "conv1.weight": self.conv1.weight.detach().clone(),
            "conv1.bias": self.conv1.bias.detach().clone(),
            "conv2.weight": self.conv2.weight.detach().clone(),
            "conv2.bias": self.conv2.bias.detach().clone(),
            "fc.weight": self.fc.weight.detach().clone(),
            "fc.bias": self.fc.bias.detach().clone(),
        }
