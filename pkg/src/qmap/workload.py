"""CNN layer workloads, networks, and per-layer bit-width configurations.

A layer is a 7-dimensional loop nest over

    N  batch          M  output channels   C  input channels
    P  output height  Q  output width      R  filter height   S  filter width

plus a stride and a kind.  Depthwise layers carry M equal to C for shape
bookkeeping but have no independent output-channel loop; fully-connected
layers are the degenerate case R = S = P = Q = 1.

Bit-width configurations attach (activation, weight, output) widths to every
layer.  The search engine manipulates them as a flat genome of alternating
(activation, weight) integers; output widths are chained from the next
layer's activation width, with the final layer's outputs fixed at 8 bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import yaml

DIMS = ("N", "M", "C", "P", "Q", "R", "S")
DIM_INDEX = {d: i for i, d in enumerate(DIMS)}

GENE_MIN = 2
GENE_MAX = 8
LAST_OUTPUT_BITS = 8


class WorkloadError(ValueError):
    """Malformed layer or network description."""


class LayerKind(str, Enum):
    STANDARD = "standard"
    DEPTHWISE = "depthwise"
    FULLY_CONNECTED = "fully_connected"


@dataclass(frozen=True)
class LayerWorkload:
    name: str
    kind: LayerKind
    n: int
    m: int
    c: int
    p: int
    q: int
    r: int
    s: int
    stride: int = 1

    def __post_init__(self) -> None:
        for dim in DIMS:
            bound = getattr(self, dim.lower())
            if bound < 1:
                raise WorkloadError(f"layer {self.name!r}: {dim} bound must be >= 1, got {bound}")
        if self.stride < 1:
            raise WorkloadError(f"layer {self.name!r}: stride must be >= 1")
        if self.kind is LayerKind.DEPTHWISE and self.m != self.c:
            raise WorkloadError(
                f"layer {self.name!r}: depthwise requires M == C, got M={self.m} C={self.c}"
            )
        if self.kind is LayerKind.FULLY_CONNECTED and (self.r, self.s, self.p, self.q) != (1, 1, 1, 1):
            raise WorkloadError(
                f"layer {self.name!r}: fully_connected requires R=S=P=Q=1"
            )

    @property
    def dims(self) -> dict[str, int]:
        return {d: getattr(self, d.lower()) for d in DIMS}

    def mapping_bounds(self) -> tuple[int, ...]:
        """Loop bounds seen by the mapper, in DIMS order.

        Depthwise layers have no independent M loop (each output channel is
        tied to its input channel), so M is pinned to 1 here.
        """
        bounds = [self.n, self.m, self.c, self.p, self.q, self.r, self.s]
        if self.kind is LayerKind.DEPTHWISE:
            bounds[DIM_INDEX["M"]] = 1
        return tuple(bounds)

    @property
    def out_channels(self) -> int:
        return self.c if self.kind is LayerKind.DEPTHWISE else self.m

    def canonical_dict(self) -> dict:
        d = {"kind": self.kind.value, "stride": self.stride}
        d.update({k.lower(): v for k, v in self.dims.items()})
        return d


def layer_macs(layer: LayerWorkload) -> int:
    """Multiply-accumulate count of one inference of the layer."""
    base = layer.n * layer.c * layer.p * layer.q * layer.r * layer.s
    if layer.kind is LayerKind.DEPTHWISE:
        return base
    return base * layer.m


def weight_count(layer: LayerWorkload) -> int:
    if layer.kind is LayerKind.DEPTHWISE:
        return layer.c * layer.r * layer.s
    if layer.kind is LayerKind.FULLY_CONNECTED:
        return layer.m * layer.c
    return layer.m * layer.c * layer.r * layer.s


def output_size(layer: LayerWorkload) -> int:
    return layer.n * layer.out_channels * layer.p * layer.q


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    layers: tuple[LayerWorkload, ...]

    def __post_init__(self) -> None:
        if not self.layers:
            raise WorkloadError(f"network {self.name!r} has no layers")

    def __len__(self) -> int:
        return len(self.layers)

    def layer_named(self, name: str) -> LayerWorkload:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def canonical_dict(self) -> dict:
        return {
            "name": self.name,
            "layers": [dict(layer.canonical_dict(), name=layer.name) for layer in self.layers],
        }


@dataclass(frozen=True)
class TensorBits:
    """Bit-widths of the three tensors of a single layer evaluation."""

    activation: int
    weight: int
    output: int

    def __post_init__(self) -> None:
        for field in ("activation", "weight", "output"):
            if getattr(self, field) < 1:
                raise WorkloadError(f"{field} bits must be >= 1")

    def for_tensor(self, tensor: str) -> int:
        return {"Input": self.activation, "Weight": self.weight, "Output": self.output}[tensor]

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.activation, self.weight, self.output)


@dataclass(frozen=True)
class QuantConfig:
    """Per-layer (activation, weight, output) bit-widths for a network.

    Genome-derived configs obey the chaining rule output[i] == activation[i+1]
    and pin the last layer's outputs to 8 bits.  Uniform configs built for
    baseline studies may use any width up to the memory word size, including
    the 16-bit unquantized reference.
    """

    activation_bits: tuple[int, ...]
    weight_bits: tuple[int, ...]
    output_bits: tuple[int, ...]

    def __post_init__(self) -> None:
        n = len(self.activation_bits)
        if not (len(self.weight_bits) == len(self.output_bits) == n) or n == 0:
            raise WorkloadError("bit-width tuples must be non-empty and equal-length")

    def __len__(self) -> int:
        return len(self.activation_bits)

    def layer_bits(self, i: int) -> TensorBits:
        return TensorBits(self.activation_bits[i], self.weight_bits[i], self.output_bits[i])

    @classmethod
    def uniform(cls, net: NetworkSpec, bits: int) -> "QuantConfig":
        n = len(net)
        return cls((bits,) * n, (bits,) * n, (bits,) * n)


Genome = tuple[int, ...]


def uniform_genome(net: NetworkSpec, bits: int) -> Genome:
    if not GENE_MIN <= bits <= GENE_MAX:
        raise WorkloadError(f"gene value {bits} outside [{GENE_MIN},{GENE_MAX}]")
    return tuple([bits, bits] * len(net))


def decode_genome(genome: Genome, net: NetworkSpec) -> QuantConfig:
    """Expand a flat (activation, weight) integer string into a QuantConfig.

    Output widths are chained: output[i] = activation[i+1]; the last layer's
    outputs are fixed at 8 bits.
    """
    n = len(net)
    if len(genome) != 2 * n:
        raise WorkloadError(f"genome length {len(genome)} != 2 x {n} layers")
    for gene in genome:
        if not GENE_MIN <= gene <= GENE_MAX:
            raise WorkloadError(f"gene value {gene} outside [{GENE_MIN},{GENE_MAX}]")
    act = tuple(genome[2 * i] for i in range(n))
    wgt = tuple(genome[2 * i + 1] for i in range(n))
    out = tuple(act[i + 1] for i in range(n - 1)) + (LAST_OUTPUT_BITS,)
    return QuantConfig(act, wgt, out)


def encode_genome(qcfg: QuantConfig) -> Genome:
    genome: list[int] = []
    for a, w in zip(qcfg.activation_bits, qcfg.weight_bits):
        genome.extend((a, w))
    return tuple(genome)


def parse_genome_text(text: str) -> Genome:
    try:
        return tuple(int(tok) for tok in text.replace(" ", "").split(",") if tok)
    except ValueError as exc:
        raise WorkloadError(f"malformed genome text: {exc}") from None


def format_genome(genome: Genome) -> str:
    return ",".join(str(g) for g in genome)


def model_size_bits(net: NetworkSpec, qcfg: QuantConfig) -> int:
    """Total bits held in weight memory: sum of weight_count * weight bits."""
    if len(qcfg) != len(net):
        raise WorkloadError("quant config does not match network")
    return sum(weight_count(layer) * qcfg.weight_bits[i] for i, layer in enumerate(net.layers))


def network_hash(net: NetworkSpec) -> int:
    """64-bit digest of the normalized network; stable across runs."""
    import hashlib
    import json

    blob = json.dumps(net.canonical_dict(), sort_keys=True, separators=(",", ":"))
    digest = hashlib.blake2b(blob.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


_LAYER_KEYS = {"name", "kind", "n", "m", "c", "p", "q", "r", "s", "stride", "allow_shape_break"}


def _build_layer(raw: dict, index: int) -> tuple[LayerWorkload, bool]:
    if not isinstance(raw, dict):
        raise WorkloadError(f"layer #{index}: expected a mapping, got {type(raw).__name__}")
    unknown = set(raw) - _LAYER_KEYS
    if unknown:
        raise WorkloadError(f"layer #{index}: unknown keys {sorted(unknown)}")
    try:
        kind = LayerKind(raw.get("kind", "standard"))
    except ValueError:
        raise WorkloadError(f"layer #{index}: unknown kind {raw.get('kind')!r}") from None
    name = raw.get("name") or f"layer{index}"
    defaults = {"n": 1, "stride": 1}
    if kind is LayerKind.FULLY_CONNECTED:
        defaults.update({"p": 1, "q": 1, "r": 1, "s": 1})
    if kind is LayerKind.DEPTHWISE and "m" not in raw and "c" in raw:
        defaults["m"] = raw["c"]
    fields = {}
    for key in ("n", "m", "c", "p", "q", "r", "s", "stride"):
        value = raw.get(key, defaults.get(key))
        if value is None:
            raise WorkloadError(f"layer {name!r}: missing dimension {key!r}")
        if not isinstance(value, int):
            raise WorkloadError(f"layer {name!r}: {key} must be an integer")
        fields[key] = value
    layer = LayerWorkload(name=name, kind=kind, **fields)
    return layer, bool(raw.get("allow_shape_break", False))


def parse_network(text: str) -> NetworkSpec:
    """Parse the textual network description (YAML subset, see README)."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise WorkloadError(f"network syntax error: {exc}") from None
    if not isinstance(doc, dict) or "layers" not in doc:
        raise WorkloadError("network document must be a mapping with a 'layers' list")
    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list) or not raw_layers:
        raise WorkloadError("'layers' must be a non-empty list")
    layers: list[LayerWorkload] = []
    names: set[str] = set()
    for i, raw in enumerate(raw_layers):
        layer, allow_break = _build_layer(raw, i)
        if layer.name in names:
            raise WorkloadError(f"duplicate layer name {layer.name!r}")
        names.add(layer.name)
        if layers and not allow_break:
            prev = layers[-1]
            if prev.out_channels != layer.c:
                raise WorkloadError(
                    f"layer {layer.name!r}: input channels {layer.c} do not match "
                    f"{prev.name!r} output channels {prev.out_channels} "
                    f"(set allow_shape_break for flattened residual joins)"
                )
        layers.append(layer)
    return NetworkSpec(name=str(doc.get("name", "network")), layers=tuple(layers))
