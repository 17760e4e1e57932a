"""Analytical cost model for one (mapping, layer, bit-widths) triple.

Traffic model
-------------
The loop nest of a mapping runs, per storage level, the level's temporal
loops (innermost-first permutation order); the PE array's spatial loops sit
between levels ``f-1`` and ``f`` where ``f`` is the fanout level index.

For a tensor held at level ``l`` the tile there is re-filled from the next
holding level above once per iteration of the first tensor-relevant temporal
loop above ``l`` and of every loop outer to it; loops over irrelevant
dimensions inner to the first relevant one reuse the resident tile.  Unit
loops never count.  Transfers are counted over unique data: spatial fanout
over a dimension irrelevant to the tensor multicasts (inputs/weights) or
spatially reduces (outputs) and does not multiply traffic.

Outputs are read-write: their refetch treats every dimension as relevant
(data dimensions change the tile, reduction dimensions force partial sums to
cycle through the level), and each refetched tile is charged one write plus
one read at that level.  The first-write optimization is deliberately not
modeled.  At the outermost holding level only the final output store (the
full output size) is charged.

Energy is per-word: element counts are converted per (level, tensor,
direction) with the packing factor of that tensor's bit-width in that
level's word.  Cycles follow a bottleneck model: the slower of compute
(MACs over active PEs) and the busiest memory level's word traffic over its
bandwidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .arch import ArchitectureSpec
from .packing import packing_factor, words_needed
from .workload import (
    DIM_INDEX,
    LayerKind,
    LayerWorkload,
    TensorBits,
    layer_macs,
    output_size,
    weight_count,
)

if TYPE_CHECKING:  # pragma: no cover - typing only, avoids an import cycle
    from .mapspace import Mapping

_N, _M, _C, _P, _Q, _R, _S = (DIM_INDEX[d] for d in "NMCPQRS")


def data_dims(kind: LayerKind, tensor: str) -> tuple[int, ...]:
    """Dimension indices whose loops index distinct data of the tensor."""
    if tensor == "Weight":
        if kind is LayerKind.DEPTHWISE:
            return (_C, _R, _S)
        return (_M, _C, _R, _S)
    if tensor == "Input":
        return (_N, _C, _P, _Q, _R, _S)
    if tensor == "Output":
        if kind is LayerKind.DEPTHWISE:
            return (_N, _C, _P, _Q)
        return (_N, _M, _P, _Q)
    raise KeyError(tensor)


@dataclass(frozen=True)
class AccessCounts:
    reads: int = 0
    writes: int = 0

    @property
    def total(self) -> int:
        return self.reads + self.writes


@dataclass(frozen=True)
class MappingMetrics:
    """Per-level access counts plus energy, cycles and EDP of one mapping."""

    element_accesses: tuple[dict[str, AccessCounts], ...]
    word_accesses: tuple[dict[str, AccessCounts], ...]
    per_level_memory_energy_pj: tuple[float, ...]
    memory_energy_pj: float
    mac_energy_pj: float
    cycles: int
    edp_pj_cycles: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "edp_pj_cycles", self.total_energy_pj * self.cycles)

    @property
    def total_energy_pj(self) -> float:
        return self.memory_energy_pj + self.mac_energy_pj

    def to_dict(self) -> dict:
        return {
            "element_accesses": [
                {t: [ac.reads, ac.writes] for t, ac in per_level.items()}
                for per_level in self.element_accesses
            ],
            "word_accesses": [
                {t: [ac.reads, ac.writes] for t, ac in per_level.items()}
                for per_level in self.word_accesses
            ],
            "per_level_memory_energy_pj": list(self.per_level_memory_energy_pj),
            "memory_energy_pj": self.memory_energy_pj,
            "mac_energy_pj": self.mac_energy_pj,
            "cycles": self.cycles,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MappingMetrics":
        return cls(
            element_accesses=tuple(
                {t: AccessCounts(r, w) for t, (r, w) in per_level.items()}
                for per_level in d["element_accesses"]
            ),
            word_accesses=tuple(
                {t: AccessCounts(r, w) for t, (r, w) in per_level.items()}
                for per_level in d["word_accesses"]
            ),
            per_level_memory_energy_pj=tuple(d["per_level_memory_energy_pj"]),
            memory_energy_pj=d["memory_energy_pj"],
            mac_energy_pj=d["mac_energy_pj"],
            cycles=d["cycles"],
        )


def cumulative_tiles(mapping: "Mapping", num_levels: int, fanout_index: int) -> list[tuple[int, ...]]:
    """Cumulative tile extent per level and dimension.

    Levels at or above the fanout aggregate the spatial split, so their
    extents include the spatial factors.
    """
    cum: list[tuple[int, ...]] = []
    running = [1] * 7
    for level in range(num_levels):
        for d in range(7):
            running[d] *= mapping.temporal[level][d]
        if level == fanout_index:
            for d in range(7):
                running[d] *= mapping.spatial[d]
        cum.append(tuple(running))
    return cum


def tile_footprint(
    mapping: "Mapping",
    layer: LayerWorkload,
    arch: ArchitectureSpec,
    level: int,
    tensor: str,
) -> int:
    """Element count of the tensor's tile resident at one level."""
    cum = cumulative_tiles(mapping, arch.num_levels, arch.fanout.level_index)
    return _footprint_from_cum(cum[level], layer, tensor)


def _footprint_from_cum(cum: tuple[int, ...], layer: LayerWorkload, tensor: str) -> int:
    if tensor == "Input":
        height = (cum[_P] - 1) * layer.stride + cum[_R]
        width = (cum[_Q] - 1) * layer.stride + cum[_S]
        return cum[_N] * cum[_C] * height * width
    size = 1
    for d in data_dims(layer.kind, tensor):
        size *= cum[d]
    return size


class Evaluator:
    """Evaluates mappings of one layer on one architecture.

    Bind once, evaluate many: enumeration and random search call this in a
    tight loop, so everything layer- and arch-dependent is precomputed.
    """

    def __init__(self, layer: LayerWorkload, arch: ArchitectureSpec):
        self.layer = layer
        self.arch = arch
        self.num_levels = arch.num_levels
        self.fanout_index = arch.fanout.level_index
        self.macs = layer_macs(layer)
        self.full_output = output_size(layer)
        self.full_weight = weight_count(layer)
        self.tensor_dims = {t: data_dims(layer.kind, t) for t in ("Input", "Weight", "Output")}
        self.holding = {t: arch.holding_levels(t) for t in ("Input", "Weight", "Output")}
        self.word_bits = tuple(lvl.word_bits for lvl in arch.levels)
        self.energy_per_word = tuple(lvl.energy_per_word_access_pj for lvl in arch.levels)
        self.bandwidth = tuple(lvl.bandwidth_words_per_cycle for lvl in arch.levels)

    # -- loop-nest reuse analysis -------------------------------------------------

    def _loops_above(self, mapping: "Mapping") -> tuple[list[tuple[int, int]], list[int], list[int]]:
        """Concatenated non-unit temporal loops of levels 1..L-1, innermost-first.

        Returns (loops, offset per level, suffix products).  The loops above
        level l start at offset[l + 1] in the concatenated list.
        """
        loops: list[tuple[int, int]] = []
        offsets = [0] * (self.num_levels + 1)
        for level in range(1, self.num_levels):
            offsets[level] = len(loops)
            for d in mapping.perms[level]:
                bound = mapping.temporal[level][d]
                if bound > 1:
                    loops.append((d, bound))
        offsets[self.num_levels] = len(loops)
        suffix = [1] * (len(loops) + 1)
        for i in range(len(loops) - 1, -1, -1):
            suffix[i] = suffix[i + 1] * loops[i][1]
        return loops, offsets, suffix

    @staticmethod
    def _refetch(loops: list[tuple[int, int]], suffix: list[int], start: int, relevant: tuple[int, ...]) -> int:
        """Refills of a tile caused by the temporal loops from `start` on."""
        for i in range(start, len(loops)):
            if loops[i][0] in relevant:
                return suffix[i]
        return 1

    def element_accesses(self, mapping: "Mapping") -> tuple[dict[str, AccessCounts], ...]:
        """Per-level, per-tensor element reads and writes (unique-data transfers)."""
        cum = cumulative_tiles(mapping, self.num_levels, self.fanout_index)
        loops, offsets, suffix = self._loops_above(mapping)
        reads = [dict.fromkeys(("Input", "Weight", "Output"), 0) for _ in range(self.num_levels)]
        writes = [dict.fromkeys(("Input", "Weight", "Output"), 0) for _ in range(self.num_levels)]

        for tensor in ("Input", "Weight"):
            held = self.holding[tensor]
            rel = self.tensor_dims[tensor]
            spatial_streams = 1
            for d in rel:
                spatial_streams *= mapping.spatial[d]
            for pos, level in enumerate(held[:-1]):
                parent = held[pos + 1]
                fill = _footprint_from_cum(cum[level], self.layer, tensor)
                if level < self.fanout_index:
                    fill *= spatial_streams
                fill *= self._refetch(loops, suffix, offsets[level + 1], rel)
                writes[level][tensor] += fill
                reads[parent][tensor] += fill

        held = self.holding["Output"]
        rel = self.tensor_dims["Output"]
        spatial_streams = 1
        for d in rel:
            spatial_streams *= mapping.spatial[d]
        for level in held[:-1]:
            traffic = _footprint_from_cum(cum[level], self.layer, "Output")
            if level < self.fanout_index:
                traffic *= spatial_streams
            traffic *= suffix[offsets[level + 1]]  # every loop above refetches partial sums
            writes[level]["Output"] += traffic
            reads[level]["Output"] += traffic
        writes[held[-1]]["Output"] += self.full_output

        return tuple(
            {t: AccessCounts(reads[level][t], writes[level][t]) for t in ("Input", "Weight", "Output")}
            for level in range(self.num_levels)
        )

    # -- metrics ------------------------------------------------------------------

    def evaluate(self, mapping: "Mapping", bits: TensorBits) -> MappingMetrics:
        elements = self.element_accesses(mapping)
        word_levels: list[dict[str, AccessCounts]] = []
        per_level_energy: list[float] = []
        memory_energy = 0.0
        for level in range(self.num_levels):
            wb = self.word_bits[level]
            words: dict[str, AccessCounts] = {}
            total_words = 0
            for tensor in ("Input", "Weight", "Output"):
                ec = elements[level][tensor]
                b = bits.for_tensor(tensor)
                wr = words_needed(ec.reads, b, wb)
                ww = words_needed(ec.writes, b, wb)
                words[tensor] = AccessCounts(wr, ww)
                total_words += wr + ww
            energy = total_words * self.energy_per_word[level]
            per_level_energy.append(energy)
            memory_energy += energy
            word_levels.append(words)

        active_pes = 1
        for d in range(7):
            active_pes *= mapping.spatial[d]
        compute_cycles = -(-self.macs // active_pes)
        memory_cycles = 0
        for level in range(self.num_levels):
            traffic = sum(word_levels[level][t].total for t in word_levels[level])
            memory_cycles = max(memory_cycles, math.ceil(traffic / self.bandwidth[level]))
        cycles = max(compute_cycles, memory_cycles)

        return MappingMetrics(
            element_accesses=elements,
            word_accesses=tuple(word_levels),
            per_level_memory_energy_pj=tuple(per_level_energy),
            memory_energy_pj=memory_energy,
            mac_energy_pj=self.macs * self.arch.energy_per_mac_pj,
            cycles=cycles,
        )


def access_counts(
    mapping: "Mapping", layer: LayerWorkload, arch: ArchitectureSpec
) -> tuple[dict[str, AccessCounts], ...]:
    """Per-level element access counts of one mapping (see module docstring)."""
    return Evaluator(layer, arch).element_accesses(mapping)


def evaluate(
    mapping: "Mapping", layer: LayerWorkload, bits: TensorBits, arch: ArchitectureSpec
) -> MappingMetrics:
    """Full metrics of one mapping; the mapping must have passed validity."""
    return Evaluator(layer, arch).evaluate(mapping, bits)
