"""Accelerator descriptions: memory hierarchy, PE array fanout, energy table.

The on-disk format is a small YAML document (see the bundled ``*.arch``
fixtures).  Levels are written outermost-first for readability and normalized
here to innermost-first: index 0 is the PE-local store, index L-1 the backing
store.  The backing store may be declared ``unbounded`` and is then modeled
with infinite capacity.

Per-level access energy is charged per memory *word*, not per element; this
is what makes bit-packing save energy at all.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import yaml

TENSORS = ("Input", "Weight", "Output")

UNBOUNDED = None  # capacity sentinel

_ALLOWED_WORD_BITS = (8, 16, 32, 64)


class ArchError(ValueError):
    """Base class for architecture description problems."""


class ArchSyntaxError(ArchError):
    pass


class ArchSemanticError(ArchError):
    pass


@dataclass(frozen=True)
class MemoryLevel:
    name: str
    word_bits: int
    energy_per_word_access_pj: float
    bandwidth_words_per_cycle: float
    tensors_held: tuple[str, ...]
    shared_capacity: bool
    capacity_words: int | None = None          # pool size when shared; None = unbounded
    per_tensor_capacity: dict[str, int | None] | None = None  # when not shared

    def __post_init__(self) -> None:
        if self.word_bits not in _ALLOWED_WORD_BITS:
            raise ArchSemanticError(
                f"level {self.name!r}: word_bits must be one of {_ALLOWED_WORD_BITS}"
            )
        if self.bandwidth_words_per_cycle <= 0:
            raise ArchSemanticError(f"level {self.name!r}: bandwidth must be > 0")
        if self.energy_per_word_access_pj < 0:
            raise ArchSemanticError(f"level {self.name!r}: energy must be >= 0")
        if not self.tensors_held:
            raise ArchSemanticError(f"level {self.name!r}: tensors_held must be non-empty")
        for t in self.tensors_held:
            if t not in TENSORS:
                raise ArchSemanticError(f"level {self.name!r}: unknown tensor {t!r}")
        if self.shared_capacity:
            self._check_capacity(self.capacity_words)
        else:
            if self.per_tensor_capacity is None:
                raise ArchSemanticError(
                    f"level {self.name!r}: per-tensor partitions need per-tensor capacities"
                )
            if set(self.per_tensor_capacity) != set(self.tensors_held):
                raise ArchSemanticError(
                    f"level {self.name!r}: per-tensor capacities must cover exactly the held tensors"
                )
            for cap in self.per_tensor_capacity.values():
                self._check_capacity(cap)

    def _check_capacity(self, cap: int | None) -> None:
        if cap is not None and cap < 1:
            raise ArchSemanticError(f"level {self.name!r}: capacity_words must be >= 1 (or unbounded)")

    def capacity_for(self, tensor: str) -> int | None:
        """Capacity available to one tensor, or the pool size when shared."""
        if self.shared_capacity:
            return self.capacity_words
        assert self.per_tensor_capacity is not None
        return self.per_tensor_capacity[tensor]

    def canonical_dict(self) -> dict:
        d: dict = {
            "name": self.name,
            "word_bits": self.word_bits,
            "energy_per_word_access_pj": self.energy_per_word_access_pj,
            "bandwidth_words_per_cycle": self.bandwidth_words_per_cycle,
            "tensors": sorted(self.tensors_held),
            "shared": self.shared_capacity,
        }
        if self.shared_capacity:
            d["capacity_words"] = self.capacity_words
        else:
            assert self.per_tensor_capacity is not None
            d["capacity_words"] = {t: self.per_tensor_capacity[t] for t in sorted(self.per_tensor_capacity)}
        return d


@dataclass(frozen=True)
class SpatialFanout:
    """PE array geometry: the array fans out below level `level_index`."""

    level_index: int
    dims_x: int
    dims_y: int

    def __post_init__(self) -> None:
        if self.dims_x < 1 or self.dims_y < 1:
            raise ArchSemanticError("fanout dimensions must be >= 1")

    @property
    def pe_count(self) -> int:
        return self.dims_x * self.dims_y


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    levels: tuple[MemoryLevel, ...]   # innermost-first
    fanout: SpatialFanout
    energy_per_mac_pj: float

    def __post_init__(self) -> None:
        if len(self.levels) < 2:
            raise ArchSemanticError("at least two storage levels are required")
        if self.energy_per_mac_pj < 0:
            raise ArchSemanticError("energy_per_mac_pj must be >= 0")
        names = [lvl.name for lvl in self.levels]
        if len(set(names)) != len(names):
            raise ArchSemanticError("duplicate level names")
        if not 1 <= self.fanout.level_index <= len(self.levels) - 1:
            raise ArchSemanticError(
                f"fanout below_level index {self.fanout.level_index} must lie in "
                f"[1, {len(self.levels) - 1}]"
            )
        held = {t for lvl in self.levels for t in lvl.tensors_held}
        missing = set(TENSORS) - held
        if missing:
            raise ArchSemanticError(f"tensors held by no level: {sorted(missing)}")

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def level_index(self, name: str) -> int:
        for i, lvl in enumerate(self.levels):
            if lvl.name == name:
                return i
        raise KeyError(name)

    def holding_levels(self, tensor: str) -> tuple[int, ...]:
        return tuple(i for i, lvl in enumerate(self.levels) if tensor in lvl.tensors_held)

    def canonical_dict(self) -> dict:
        return {
            "name": self.name,
            "levels": [lvl.canonical_dict() for lvl in self.levels],
            "fanout": {
                "below_level": self.fanout.level_index,
                "x": self.fanout.dims_x,
                "y": self.fanout.dims_y,
            },
            "energy_per_mac_pj": self.energy_per_mac_pj,
        }


def canonical_hash(spec: ArchitectureSpec) -> int:
    """64-bit digest of the normalized spec; stable across runs and key order."""
    blob = json.dumps(spec.canonical_dict(), sort_keys=True, separators=(",", ":"))
    digest = hashlib.blake2b(blob.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


_LEVEL_KEYS = {
    "name", "capacity_words", "unbounded", "word_bits",
    "energy_per_word_access_pj", "bandwidth_words_per_cycle", "tensors", "shared",
}


def _build_level(raw: dict, index: int) -> MemoryLevel:
    if not isinstance(raw, dict):
        raise ArchSemanticError(f"level #{index}: expected a mapping")
    unknown = set(raw) - _LEVEL_KEYS
    if unknown:
        raise ArchSemanticError(f"level #{index}: unknown keys {sorted(unknown)}")
    name = raw.get("name")
    if not name:
        raise ArchSemanticError(f"level #{index}: missing name")
    for key in ("word_bits", "energy_per_word_access_pj", "bandwidth_words_per_cycle", "tensors"):
        if key not in raw:
            raise ArchSemanticError(f"level {name!r}: missing {key!r}")
    tensors = tuple(raw["tensors"])
    shared = bool(raw.get("shared", True))
    unbounded = bool(raw.get("unbounded", False))
    cap = raw.get("capacity_words")
    capacity_words: int | None = None
    per_tensor: dict[str, int | None] | None = None
    if unbounded:
        if cap is not None:
            raise ArchSemanticError(f"level {name!r}: unbounded excludes capacity_words")
        if shared:
            capacity_words = UNBOUNDED
        else:
            per_tensor = {t: UNBOUNDED for t in tensors}
    elif shared:
        if not isinstance(cap, int):
            raise ArchSemanticError(f"level {name!r}: capacity_words must be an integer")
        capacity_words = cap
    else:
        if isinstance(cap, int):
            per_tensor = {t: cap for t in tensors}
        elif isinstance(cap, dict):
            per_tensor = {str(t): v for t, v in cap.items()}
        else:
            raise ArchSemanticError(
                f"level {name!r}: capacity_words must be an integer or a per-tensor mapping"
            )
    return MemoryLevel(
        name=str(name),
        word_bits=int(raw["word_bits"]),
        energy_per_word_access_pj=float(raw["energy_per_word_access_pj"]),
        bandwidth_words_per_cycle=float(raw["bandwidth_words_per_cycle"]),
        tensors_held=tensors,
        shared_capacity=shared,
        capacity_words=capacity_words,
        per_tensor_capacity=per_tensor,
    )


def parse_arch(text: str) -> ArchitectureSpec:
    """Parse and validate a textual accelerator description."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ArchSyntaxError(f"architecture syntax error{where}: {exc}") from None
    if not isinstance(doc, dict):
        raise ArchSyntaxError("architecture document must be a mapping")
    for key in ("levels", "fanout", "energy_per_mac_pj"):
        if key not in doc:
            raise ArchSemanticError(f"missing top-level key {key!r}")
    raw_levels = doc["levels"]
    if not isinstance(raw_levels, list) or len(raw_levels) < 2:
        raise ArchSemanticError("'levels' must list at least two levels (outermost first)")
    # File order is outermost-first; flip to innermost-first.
    levels = tuple(_build_level(raw, i) for i, raw in enumerate(reversed(raw_levels)))

    raw_fanout = doc["fanout"]
    if not isinstance(raw_fanout, dict) or not {"x", "y", "below_level"} <= set(raw_fanout):
        raise ArchSemanticError("'fanout' must define x, y and below_level")
    below = raw_fanout["below_level"]
    if isinstance(below, str):
        matches = [i for i, lvl in enumerate(levels) if lvl.name == below]
        if not matches:
            raise ArchSemanticError(f"fanout below_level {below!r} names no level")
        below_index = matches[0]
    elif isinstance(below, int):
        below_index = below
    else:
        raise ArchSemanticError("fanout below_level must be a level name or index")
    fanout = SpatialFanout(level_index=below_index, dims_x=int(raw_fanout["x"]), dims_y=int(raw_fanout["y"]))

    pe_count = doc.get("pe_count")
    if pe_count is not None and pe_count != fanout.pe_count:
        raise ArchSemanticError(
            f"declared pe_count {pe_count} != fanout {fanout.dims_x}x{fanout.dims_y}"
        )

    return ArchitectureSpec(
        name=str(doc.get("name", "accelerator")),
        levels=levels,
        fanout=fanout,
        energy_per_mac_pj=float(doc["energy_per_mac_pj"]),
    )


def serialize_arch(spec: ArchitectureSpec) -> str:
    """Emit the file form (outermost-first) of a spec; parses back to an equal spec."""
    levels_out = []
    for lvl in reversed(spec.levels):
        raw: dict = {"name": lvl.name}
        if lvl.shared_capacity:
            if lvl.capacity_words is UNBOUNDED:
                raw["unbounded"] = True
            else:
                raw["capacity_words"] = lvl.capacity_words
        else:
            assert lvl.per_tensor_capacity is not None
            if all(v is UNBOUNDED for v in lvl.per_tensor_capacity.values()):
                raw["unbounded"] = True
            else:
                raw["capacity_words"] = dict(lvl.per_tensor_capacity)
        raw.update(
            word_bits=lvl.word_bits,
            energy_per_word_access_pj=lvl.energy_per_word_access_pj,
            bandwidth_words_per_cycle=lvl.bandwidth_words_per_cycle,
            tensors=list(lvl.tensors_held),
            shared=lvl.shared_capacity,
        )
        levels_out.append(raw)
    doc = {
        "name": spec.name,
        "energy_per_mac_pj": spec.energy_per_mac_pj,
        "fanout": {
            "x": spec.fanout.dims_x,
            "y": spec.fanout.dims_y,
            "below_level": spec.levels[spec.fanout.level_index].name,
        },
        "levels": levels_out,
    }
    return yaml.safe_dump(doc, sort_keys=False)


def effective_capacity(level: MemoryLevel, tensor: str) -> float:
    """Capacity as a comparable number; unbounded maps to +inf."""
    cap = level.capacity_for(tensor)
    return math.inf if cap is UNBOUNDED else float(cap)
