"""Shared test fixtures and generators."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qmap.arch import ArchitectureSpec, MemoryLevel, SpatialFanout, parse_arch
from qmap.fixtures import fixture_text
from qmap.workload import LayerKind, LayerWorkload, NetworkSpec, parse_network

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


class acceptance:
    """Records one acceptance criterion's outcome for the terminal summary."""

    def __init__(self, name: str):
        self.name = name
        self.detail = ""

    def __enter__(self):
        ACCEPTANCE_RESULTS[self.name] = (False, "did not complete")
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            ACCEPTANCE_RESULTS[self.name] = (True, self.detail)
        else:
            ACCEPTANCE_RESULTS[self.name] = (False, f"{exc_type.__name__}: {exc}")
        return False


def _level(name, cap, energy, bw=4.0, tensors=("Input", "Weight", "Output"),
           shared=True, word_bits=16, per_tensor=None):
    return MemoryLevel(
        name=name,
        word_bits=word_bits,
        energy_per_word_access_pj=energy,
        bandwidth_words_per_cycle=bw,
        tensors_held=tuple(tensors),
        shared_capacity=shared,
        capacity_words=cap if shared else None,
        per_tensor_capacity=per_tensor if not shared else None,
    )


def small_arch(levels=2, fanout_xy=(2, 2), fanout_below=1, caps=(64, None)) -> ArchitectureSpec:
    mem = []
    for i in range(levels):
        cap = caps[i] if i < len(caps) else None
        mem.append(_level(f"L{i}", cap, energy=float(levels - i)))
    return ArchitectureSpec(
        name="testarch",
        levels=tuple(mem),
        fanout=SpatialFanout(level_index=fanout_below, dims_x=fanout_xy[0], dims_y=fanout_xy[1]),
        energy_per_mac_pj=0.5,
    )


def random_layer(rng: np.random.Generator, max_dim: int = 4) -> LayerWorkload:
    kind = rng.choice([LayerKind.STANDARD, LayerKind.DEPTHWISE, LayerKind.FULLY_CONNECTED],
                      p=[0.5, 0.3, 0.2])
    dim = lambda: int(rng.integers(1, max_dim + 1))
    if kind is LayerKind.FULLY_CONNECTED:
        return LayerWorkload("rand_fc", kind, n=dim(), m=dim(), c=dim(), p=1, q=1, r=1, s=1)
    stride = int(rng.integers(1, 3))
    if kind is LayerKind.DEPTHWISE:
        c = dim()
        return LayerWorkload("rand_dw", kind, n=dim(), m=c, c=c,
                             p=dim(), q=dim(), r=dim(), s=dim(), stride=stride)
    return LayerWorkload("rand_std", kind, n=dim(), m=dim(), c=dim(),
                         p=dim(), q=dim(), r=dim(), s=dim(), stride=stride)


def random_arch(rng: np.random.Generator, max_levels: int = 3) -> ArchitectureSpec:
    levels = int(rng.integers(2, max_levels + 1))
    mem = []
    for i in range(levels):
        unbounded = i == levels - 1 or rng.random() < 0.2
        shared = bool(rng.random() < 0.5)
        tensors = ("Input", "Weight", "Output")
        if shared:
            cap = None if unbounded else int(rng.integers(8, 200))
            mem.append(_level(f"L{i}", cap, energy=float(2 ** (levels - i)), shared=True))
        else:
            per_tensor = {t: (None if unbounded else int(rng.integers(8, 200))) for t in tensors}
            mem.append(_level(f"L{i}", None, energy=float(2 ** (levels - i)),
                              shared=False, per_tensor=per_tensor))
    fanout_below = int(rng.integers(1, levels))
    dims_x = int(rng.integers(1, 5))
    dims_y = int(rng.integers(1, 5))
    return ArchitectureSpec(
        name="randarch",
        levels=tuple(mem),
        fanout=SpatialFanout(level_index=fanout_below, dims_x=dims_x, dims_y=dims_y),
        energy_per_mac_pj=1.0,
    )


@pytest.fixture(scope="session")
def eyeriss() -> ArchitectureSpec:
    return parse_arch(fixture_text("eyeriss", "arch"))


@pytest.fixture(scope="session")
def simba() -> ArchitectureSpec:
    return parse_arch(fixture_text("simba", "arch"))


@pytest.fixture(scope="session")
def toy_net() -> NetworkSpec:
    return parse_network(fixture_text("toy", "net"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[name]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}: {detail}")
