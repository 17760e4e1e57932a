import numpy as np
import pytest

from conftest import small_arch
from qmap.engine import MappingEngine, NoValidMappingError
from qmap.mapspace import MapperConfig, check_validity, enumerate_mappings
from qmap.costmodel import Evaluator
from qmap.workload import (
    LayerKind,
    LayerWorkload,
    NetworkSpec,
    QuantConfig,
    TensorBits,
)


def make_layer(**dims):
    name = dims.pop("name", "layer")
    kind = dims.pop("kind", LayerKind.STANDARD)
    base = dict(n=1, m=1, c=1, p=1, q=1, r=1, s=1, stride=1)
    base.update(dims)
    return LayerWorkload(name=name, kind=kind, **base)


def brute_force_best(layer, arch, bits):
    evaluator = Evaluator(layer, arch)
    best = None
    count = 0
    for mapping in enumerate_mappings(layer, arch):
        if check_validity(mapping, layer, arch, bits):
            continue
        count += 1
        metrics = evaluator.evaluate(mapping, bits)
        if best is None or metrics.edp_pj_cycles < best:
            best = metrics.edp_pj_cycles
    return count, best


class TestExhaustive:
    def test_count_and_optimum_match_brute_force(self):
        layer = make_layer(m=4, c=4, p=2, q=2)
        arch = small_arch(levels=2, fanout_xy=(2, 2), caps=(24, None))
        engine = MappingEngine(arch, MapperConfig(mode="exhaustive"))
        result = engine.count_valid(layer, TensorBits(8, 8, 8))
        count, best_edp = brute_force_best(layer, arch, TensorBits(8, 8, 8))
        assert result.valid_count == count
        assert result.best_metrics.edp_pj_cycles == best_edp

    def test_valid_count_grows_as_bits_shrink(self):
        layer = make_layer(kind=LayerKind.DEPTHWISE, m=4, c=4, p=2, q=2, r=3, s=3)
        arch = small_arch(levels=2, fanout_xy=(2, 2), caps=(16, None))
        engine = MappingEngine(arch, MapperConfig(mode="exhaustive"))
        counts = []
        best = []
        for bits in (16, 8, 4, 2):
            result = engine.count_valid(layer, TensorBits(bits, bits, bits))
            counts.append(result.valid_count)
            best.append(result.best_metrics.edp_pj_cycles if result.best_metrics else float("inf"))
        assert counts == sorted(counts)
        assert best == sorted(best, reverse=True)

    def test_no_valid_mapping_reports_tightest(self):
        layer = make_layer(m=4, c=4, p=4, q=4, r=3, s=3)
        arch = small_arch(levels=2, fanout_xy=(1, 1), caps=(1, None))
        engine = MappingEngine(arch, MapperConfig(mode="exhaustive"))
        with pytest.raises(NoValidMappingError) as info:
            engine.best_mapping(layer, TensorBits(16, 16, 16))
        assert info.value.tightest is not None
        assert info.value.tightest.capacity_words == 1


class TestRandom:
    def test_deterministic_given_seed(self):
        layer = make_layer(m=4, c=4, p=2, q=2, r=3, s=3)
        arch = small_arch(levels=2, fanout_xy=(2, 2), caps=(48, None))
        cfg = MapperConfig(mode="random", valid_target=50, sample_budget=5000, seed=42)
        r1 = MappingEngine(arch, cfg).search_layer(layer, TensorBits(8, 8, 8))
        r2 = MappingEngine(arch, cfg).search_layer(layer, TensorBits(8, 8, 8))
        assert r1 == r2

    def test_random_optimum_bounded_by_exhaustive(self):
        layer = make_layer(m=4, c=4, p=2, q=2)
        arch = small_arch(levels=2, fanout_xy=(2, 2), caps=(24, None))
        bits = TensorBits(8, 8, 8)
        exhaustive = MappingEngine(arch, MapperConfig(mode="exhaustive")).search_layer(layer, bits)
        random_cfg = MapperConfig(mode="random", valid_target=100, sample_budget=10_000, seed=7)
        randomized = MappingEngine(arch, random_cfg).search_layer(layer, bits)
        assert randomized.best_metrics.edp_pj_cycles >= exhaustive.best_metrics.edp_pj_cycles

    def test_budget_exhaustion_reports_what_was_found(self):
        layer = make_layer(m=4, c=4, p=4, q=4, r=3, s=3)
        arch = small_arch(levels=2, fanout_xy=(1, 1), caps=(2, None))
        cfg = MapperConfig(mode="random", valid_target=10, sample_budget=50, seed=0)
        result = MappingEngine(arch, cfg).search_layer(layer, TensorBits(16, 16, 16))
        assert result.examined == 50
        assert result.valid_count < 10


class TestNetworkMetrics:
    def net(self):
        return NetworkSpec("net2", (
            make_layer(name="a", m=4, c=2, p=2, q=2, r=3, s=3),
            make_layer(name="b", m=4, c=4, p=2, q=2, r=1, s=1),
        ))

    def engine(self):
        arch = small_arch(levels=2, fanout_xy=(2, 2), caps=(64, None))
        return MappingEngine(arch, MapperConfig(mode="random", valid_target=40,
                                                sample_budget=4000, seed=3))

    def test_totals_are_sums(self):
        engine = self.engine()
        net = self.net()
        metrics = engine.network_metrics(net, QuantConfig.uniform(net, 8))
        assert metrics.energy_pj == pytest.approx(
            sum(r.best_metrics.total_energy_pj for r in metrics.per_layer))
        assert metrics.cycles == sum(r.best_metrics.cycles for r in metrics.per_layer)
        assert metrics.edp_pj_cycles == pytest.approx(metrics.energy_pj * metrics.cycles)

    def test_single_layer_totals_equal_layer(self):
        net = NetworkSpec("one", (make_layer(name="a", m=4, c=2, p=2, q=2),))
        engine = self.engine()
        metrics = engine.network_metrics(net, QuantConfig.uniform(net, 8))
        layer_metrics = metrics.per_layer[0].best_metrics
        assert metrics.energy_pj == pytest.approx(layer_metrics.total_energy_pj)
        assert metrics.cycles == layer_metrics.cycles

    def test_duplicate_layers_double_exactly(self):
        layer_a = make_layer(name="a", m=4, c=4, p=2, q=2)
        layer_b = make_layer(name="b", m=4, c=4, p=2, q=2)
        net = NetworkSpec("twins", (layer_a, layer_b))
        engine = self.engine()
        metrics = engine.network_metrics(net, QuantConfig.uniform(net, 8))
        single = engine.search_layer(layer_a, TensorBits(8, 8, 8)).best_metrics
        assert metrics.energy_pj == pytest.approx(2 * single.total_energy_pj)
        assert metrics.cycles == 2 * single.cycles

    def test_memory_energy_drops_at_4_bits(self):
        engine = self.engine()
        net = self.net()
        at8 = engine.network_metrics(net, QuantConfig.uniform(net, 8))
        at4 = engine.network_metrics(net, QuantConfig.uniform(net, 4))
        assert at4.memory_energy_pj < at8.memory_energy_pj
        assert at4.mac_energy_pj == at8.mac_energy_pj
