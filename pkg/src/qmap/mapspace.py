"""Mapping representation, enumeration, sampling, and validity checking.

A mapping assigns every loop dimension an ordered factorization of its bound
into one spatial part (at the single PE-array fanout) followed by one
temporal part per storage level, plus a loop permutation per level.
Factorizations are perfect: parts multiply back to the layer bound exactly.

Permutations are canonicalized so that loop orders differing only in the
placement of unit loops are not counted twice: only dimensions with a
temporal factor greater than one at a level are ordered there, the rest sit
outermost in fixed dimension order.  Spatial factors are assigned to the
array's X side greedily in dimension order, overflowing to Y; factorizations
whose spatial parts fit neither way are not representable and are skipped.

Validity is the bit-packing-aware capacity check: at every level, each held
tensor's resident tile must fit after conversion to memory words at the
tensor's bit-width (summed over tensors when the level is one shared pool,
per tensor when partitioned).  All violations are reported, not just the
first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations, product
from typing import Iterator

import numpy as np

from .arch import ArchitectureSpec, effective_capacity
from .costmodel import _footprint_from_cum, cumulative_tiles
from .packing import words_needed
from .workload import DIMS, LayerWorkload, TensorBits

_DIM_LETTERS = "".join(DIMS)


class MapspaceError(ValueError):
    pass


class SpaceTooLargeError(MapspaceError):
    def __init__(self, estimated: int, ceiling: int):
        super().__init__(
            f"exhaustive mapping space holds about {estimated} candidates, "
            f"over the ceiling of {ceiling}"
        )
        self.estimated = estimated
        self.ceiling = ceiling


@dataclass(frozen=True)
class Mapping:
    """One placement of a layer's loop nest onto an architecture.

    temporal[level][dim] are the per-level tile factors, perms[level] lists
    dimension indices innermost-first, spatial[dim] is the PE-array split.
    """

    temporal: tuple[tuple[int, ...], ...]
    perms: tuple[tuple[int, ...], ...]
    spatial: tuple[int, ...]
    x_dims: tuple[int, ...]
    y_dims: tuple[int, ...]

    @property
    def active_pes(self) -> int:
        pes = 1
        for s in self.spatial:
            pes *= s
        return pes


@dataclass(frozen=True)
class MapperConfig:
    """How the per-layer mapper searches: exhaustively or by random draws."""

    mode: str = "random"                 # "exhaustive" | "random"
    valid_target: int = 2000
    sample_budget: int = 200_000
    seed: int = 0
    enum_ceiling: int = 100_000_000

    def __post_init__(self) -> None:
        if self.mode not in ("exhaustive", "random"):
            raise MapspaceError(f"unknown mapper mode {self.mode!r}")
        if self.valid_target < 1:
            raise MapspaceError("valid_target must be >= 1")
        if self.sample_budget < self.valid_target:
            raise MapspaceError("sample_budget must be >= valid_target")

    def canonical_dict(self) -> dict:
        return {
            "mode": self.mode,
            "valid_target": self.valid_target,
            "sample_budget": self.sample_budget,
            "seed": self.seed,
            "enum_ceiling": self.enum_ceiling,
        }


@dataclass(frozen=True)
class Violation:
    """A tile that does not fit its level after bit-packing."""

    level_index: int
    level_name: str
    tensor: str
    required_words: int
    capacity_words: int | None

    def __str__(self) -> str:
        return (
            f"{self.tensor} tile needs {self.required_words} words at "
            f"{self.level_name} (level {self.level_index}), capacity {self.capacity_words}"
        )


# -- factorization utilities -----------------------------------------------------


@lru_cache(maxsize=None)
def divisors(n: int) -> tuple[int, ...]:
    small, large = [], []
    for i in range(1, int(math.isqrt(n)) + 1):
        if n % i == 0:
            small.append(i)
            if i != n // i:
                large.append(n // i)
    return tuple(small + large[::-1])


@lru_cache(maxsize=None)
def factorization_count(n: int, parts: int) -> int:
    """Number of ordered factorizations of n into `parts` positive factors."""
    if parts == 1:
        return 1
    return sum(factorization_count(n // d, parts - 1) for d in divisors(n))


@lru_cache(maxsize=None)
def ordered_factorizations(n: int, parts: int) -> tuple[tuple[int, ...], ...]:
    if parts == 1:
        return ((n,),)
    result = []
    for d in divisors(n):
        for rest in ordered_factorizations(n // d, parts - 1):
            result.append((d,) + rest)
    return tuple(result)


def sample_ordered_factorization(n: int, parts: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Draw uniformly among ordered factorizations of n into `parts` factors."""
    out: list[int] = []
    remaining = n
    for slot in range(parts, 1, -1):
        total = factorization_count(remaining, slot)
        pick = rng.integers(total)
        acc = 0
        for d in divisors(remaining):
            acc += factorization_count(remaining // d, slot - 1)
            if pick < acc:
                out.append(d)
                remaining //= d
                break
    out.append(remaining)
    return tuple(out)


def canonical_perm(ordered_nonunit: tuple[int, ...], factors: tuple[int, ...]) -> tuple[int, ...]:
    """Full 7-dim permutation: ordered non-unit dims innermost, unit dims outermost."""
    units = tuple(d for d in range(7) if factors[d] == 1)
    return ordered_nonunit + units


def greedy_spatial_assignment(
    spatial: tuple[int, ...], arch: ArchitectureSpec
) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    """Assign spatial factors to the X then Y array sides; None if they fit neither."""
    x_dims: list[int] = []
    y_dims: list[int] = []
    x_used = 1
    y_used = 1
    for d in range(7):
        f = spatial[d]
        if f == 1:
            continue
        if x_used * f <= arch.fanout.dims_x:
            x_dims.append(d)
            x_used *= f
        elif y_used * f <= arch.fanout.dims_y:
            y_dims.append(d)
            y_used *= f
        else:
            return None
    return tuple(x_dims), tuple(y_dims)


def _build_mapping(
    arch: ArchitectureSpec,
    spatial: tuple[int, ...],
    temporal: tuple[tuple[int, ...], ...],
    nonunit_orders: tuple[tuple[int, ...], ...],
) -> Mapping | None:
    assignment = greedy_spatial_assignment(spatial, arch)
    if assignment is None:
        return None
    perms = tuple(
        canonical_perm(order, factors) for order, factors in zip(nonunit_orders, temporal)
    )
    return Mapping(temporal=temporal, perms=perms, spatial=spatial,
                   x_dims=assignment[0], y_dims=assignment[1])


def estimate_space(layer: LayerWorkload, arch: ArchitectureSpec, ceiling: int) -> int:
    """Candidate count of the exhaustive walk; raises if it exceeds the ceiling."""
    bounds = layer.mapping_bounds()
    levels = arch.num_levels
    combos = 1
    for b in bounds:
        combos *= factorization_count(b, levels + 1)
        if combos > ceiling:
            raise SpaceTooLargeError(combos, ceiling)
    total = 0
    for parts in product(*(ordered_factorizations(b, levels + 1) for b in bounds)):
        spatial = tuple(p[0] for p in parts)
        if greedy_spatial_assignment(spatial, arch) is None:
            continue
        per_combo = 1
        for level in range(levels):
            nonunit = sum(1 for d in range(7) if parts[d][level + 1] > 1)
            per_combo *= math.factorial(nonunit)
        total += per_combo
        if total > ceiling:
            raise SpaceTooLargeError(total, ceiling)
    return total


def enumerate_mappings(
    layer: LayerWorkload, arch: ArchitectureSpec, ceiling: int = MapperConfig.enum_ceiling
) -> Iterator[Mapping]:
    """Yield every representable mapping exactly once, in a deterministic order.

    Validity is not checked here.  Raises SpaceTooLargeError before yielding
    anything if the candidate count exceeds the ceiling.
    """
    estimate_space(layer, arch, ceiling)
    bounds = layer.mapping_bounds()
    levels = arch.num_levels
    for parts in product(*(ordered_factorizations(b, levels + 1) for b in bounds)):
        spatial = tuple(p[0] for p in parts)
        temporal = tuple(tuple(parts[d][level + 1] for d in range(7)) for level in range(levels))
        assignment = greedy_spatial_assignment(spatial, arch)
        if assignment is None:
            continue
        level_orders = []
        for level in range(levels):
            nonunit = tuple(d for d in range(7) if temporal[level][d] > 1)
            level_orders.append(tuple(permutations(nonunit)) if nonunit else ((),))
        for orders in product(*level_orders):
            perms = tuple(canonical_perm(o, temporal[lvl]) for lvl, o in enumerate(orders))
            yield Mapping(temporal=temporal, perms=perms, spatial=spatial,
                          x_dims=assignment[0], y_dims=assignment[1])


def sample_mapping(layer: LayerWorkload, arch: ArchitectureSpec, rng: np.random.Generator) -> Mapping:
    """Draw a mapping: uniform ordered factorization per dim, uniform loop order per level.

    Factorizations whose spatial parts do not fit the PE array are rejected
    and redrawn, so the result is uniform over representable factorizations.
    """
    bounds = layer.mapping_bounds()
    levels = arch.num_levels
    while True:
        parts = tuple(sample_ordered_factorization(b, levels + 1, rng) for b in bounds)
        spatial = tuple(p[0] for p in parts)
        temporal = tuple(tuple(parts[d][level + 1] for d in range(7)) for level in range(levels))
        orders = []
        for level in range(levels):
            nonunit = [d for d in range(7) if temporal[level][d] > 1]
            if len(nonunit) > 1:
                rng.shuffle(nonunit)
            orders.append(tuple(nonunit))
        mapping = _build_mapping(arch, spatial, temporal, tuple(orders))
        if mapping is not None:
            return mapping


def check_validity(
    mapping: Mapping, layer: LayerWorkload, arch: ArchitectureSpec, bits: TensorBits
) -> list[Violation]:
    """Bit-packing-aware capacity check; an empty list means the mapping is valid."""
    cum = cumulative_tiles(mapping, arch.num_levels, arch.fanout.level_index)
    violations: list[Violation] = []
    for index, level in enumerate(arch.levels):
        words_by_tensor: dict[str, int] = {}
        for tensor in level.tensors_held:
            elements = _footprint_from_cum(cum[index], layer, tensor)
            words_by_tensor[tensor] = words_needed(elements, bits.for_tensor(tensor), level.word_bits)
        if level.shared_capacity:
            required = sum(words_by_tensor.values())
            if required > effective_capacity(level, level.tensors_held[0]):
                # one pool: attribute the violation to the whole level per tensor set
                violations.append(Violation(index, level.name, "+".join(level.tensors_held),
                                            required, level.capacity_words))
        else:
            for tensor, required in words_by_tensor.items():
                if required > effective_capacity(level, tensor):
                    violations.append(Violation(index, level.name, tensor,
                                                required, level.capacity_for(tensor)))
    return violations


# -- text encoding ----------------------------------------------------------------


def encode_mapping(mapping: Mapping) -> str:
    """Stable text form, also the tie-break key for equal-EDP mappings."""
    parts = []
    for level, (perm, factors) in enumerate(zip(mapping.perms, mapping.temporal)):
        letters = "".join(_DIM_LETTERS[d] for d in perm)
        tlist = ",".join(str(f) for f in factors)
        parts.append(f"L{level}: perm={letters} t=[{tlist}]")
    x = " ".join(f"{_DIM_LETTERS[d]}:{mapping.spatial[d]}" for d in mapping.x_dims)
    y = " ".join(f"{_DIM_LETTERS[d]}:{mapping.spatial[d]}" for d in mapping.y_dims)
    parts.append(f"spatial: X=[{x}] Y=[{y}]")
    return " | ".join(parts)


def decode_mapping(text: str) -> Mapping:
    """Inverse of encode_mapping."""
    try:
        *level_parts, spatial_part = text.split(" | ")
        temporal = []
        perms = []
        for part in level_parts:
            _, fields = part.split(": ", 1)
            perm_field, t_field = fields.split(" t=")
            letters = perm_field.removeprefix("perm=")
            perms.append(tuple(_DIM_LETTERS.index(ch) for ch in letters))
            temporal.append(tuple(int(v) for v in t_field.strip("[]").split(",")))
        spatial = [1] * 7
        x_dims: list[int] = []
        y_dims: list[int] = []
        body = spatial_part.removeprefix("spatial: ")
        x_body, y_body = body.split(" Y=")
        for target, chunk in ((x_dims, x_body.removeprefix("X=")), (y_dims, y_body)):
            chunk = chunk.strip("[]")
            if chunk:
                for item in chunk.split(" "):
                    letter, value = item.split(":")
                    d = _DIM_LETTERS.index(letter)
                    spatial[d] = int(value)
                    target.append(d)
        return Mapping(temporal=tuple(temporal), perms=tuple(perms), spatial=tuple(spatial),
                       x_dims=tuple(x_dims), y_dims=tuple(y_dims))
    except (ValueError, IndexError) as exc:
        raise MapspaceError(f"malformed mapping text {text!r}: {exc}") from None
