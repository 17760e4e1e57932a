import json

from conftest import small_arch
from qmap.cache import ResultCache, cache_key
from qmap.engine import MappingEngine
from qmap.mapspace import MapperConfig
from qmap.workload import LayerKind, LayerWorkload, NetworkSpec, QuantConfig, TensorBits


def make_layer(**dims):
    name = dims.pop("name", "layer")
    base = dict(n=1, m=1, c=1, p=1, q=1, r=1, s=1, stride=1)
    base.update(dims)
    return LayerWorkload(name=name, kind=LayerKind.STANDARD, **base)


ARCH = small_arch(levels=2, fanout_xy=(2, 2), caps=(64, None))
MAPPER = MapperConfig(mode="random", valid_target=30, sample_budget=3000, seed=5)
BITS = TensorBits(8, 8, 8)
LAYER = make_layer(m=4, c=4, p=2, q=2)


class TestKey:
    def test_layer_name_is_not_part_of_the_key(self):
        a = make_layer(name="a", m=4, c=4)
        b = make_layer(name="b", m=4, c=4)
        assert cache_key(ARCH, a, BITS, MAPPER) == cache_key(ARCH, b, BITS, MAPPER)

    def test_sensitivity(self):
        base = cache_key(ARCH, LAYER, BITS, MAPPER)
        assert cache_key(ARCH, make_layer(m=4, c=8, p=2, q=2), BITS, MAPPER) != base
        assert cache_key(ARCH, LAYER, TensorBits(8, 4, 8), MAPPER) != base
        assert cache_key(ARCH, LAYER, BITS, MapperConfig(mode="random", valid_target=30,
                                                         sample_budget=3000, seed=6)) != base
        other_arch = small_arch(levels=2, fanout_xy=(2, 2), caps=(65, None))
        assert cache_key(other_arch, LAYER, BITS, MAPPER) != base

    def test_stable_across_processes(self):
        # pure function of canonical dictionaries, no runtime identity involved
        assert cache_key(ARCH, LAYER, BITS, MAPPER) == cache_key(ARCH, LAYER, BITS, MAPPER)

    def test_env_var_selects_default_directory(self, monkeypatch, tmp_path):
        from qmap.cache import default_cache_dir
        monkeypatch.setenv("QMAP_CACHE_DIR", str(tmp_path / "elsewhere"))
        assert default_cache_dir() == tmp_path / "elsewhere"
        monkeypatch.delenv("QMAP_CACHE_DIR")
        assert default_cache_dir().name == "qmap"


class TestStore:
    def test_get_after_put(self, tmp_path):
        cache = ResultCache(tmp_path)
        cache.put("aa11", {"x": 1})
        assert cache.get("aa11") == {"x": 1}

    def test_miss_on_empty(self, tmp_path):
        assert ResultCache(tmp_path).get("deadbeef") is None

    def test_first_writer_wins(self, tmp_path):
        cache = ResultCache(tmp_path)
        cache.put("aa11", {"x": 1})
        cache.put("aa11", {"x": 2})
        assert cache.get("aa11") == {"x": 1}
        fresh = ResultCache(tmp_path)
        assert fresh.get("aa11") == {"x": 1}

    def test_persisted_entries_survive_new_process(self, tmp_path):
        ResultCache(tmp_path).put("bb22", {"y": [1, 2]})
        assert ResultCache(tmp_path).get("bb22") == {"y": [1, 2]}

    def test_corrupted_entry_is_a_miss(self, tmp_path, caplog):
        cache = ResultCache(tmp_path)
        cache.put("cc33", {"z": 3})
        path = tmp_path / "cc" / "cc33.json"
        path.write_text("{not json")
        fresh = ResultCache(tmp_path)
        with caplog.at_level("WARNING"):
            assert fresh.get("cc33") is None
        assert "corrupted" in caplog.text

    def test_size_cap_evicts_oldest(self, tmp_path):
        import os
        import time
        cache = ResultCache(tmp_path, max_bytes=250)
        for i in range(6):
            cache.put(f"k{i:02d}", {"payload": "x" * 50, "i": i})
            # spread mtimes so oldest-first ordering is well-defined
            entry = tmp_path / f"k{i:02d}"[:2] / f"k{i:02d}.json"
            stamp = time.time() - (6 - i) * 10
            os.utime(entry, (stamp, stamp))
        remaining = list(tmp_path.glob("*/*.json"))
        assert 0 < len(remaining) < 6
        assert sum(p.stat().st_size for p in remaining) <= 250


class TestTransparency:
    def test_duplicate_layers_share_one_entry(self, tmp_path):
        net = NetworkSpec("twins", (make_layer(name="a", m=4, c=4, p=2, q=2),
                                    make_layer(name="b", m=4, c=4, p=2, q=2)))
        cache = ResultCache(tmp_path)
        engine = MappingEngine(ARCH, MAPPER, cache)
        engine.network_metrics(net, QuantConfig.uniform(net, 8))
        assert engine.mapper_invocations == 1
        assert cache.hits == 1 and cache.misses == 1

    def test_cache_never_changes_results(self, tmp_path):
        net = NetworkSpec("net", (make_layer(name="a", m=4, c=2, p=2, q=2, r=3, s=3),
                                  make_layer(name="b", m=8, c=4, p=2, q=2)))
        qcfg = QuantConfig.uniform(net, 4)
        without = MappingEngine(ARCH, MAPPER, None).network_metrics(net, qcfg)
        cached_engine = MappingEngine(ARCH, MAPPER, ResultCache(tmp_path))
        first = cached_engine.network_metrics(net, qcfg)
        second = cached_engine.network_metrics(net, qcfg)  # fully served from cache
        warm = MappingEngine(ARCH, MAPPER, ResultCache(tmp_path)).network_metrics(net, qcfg)
        for other in (first, second, warm):
            assert other.energy_pj == without.energy_pj
            assert other.cycles == without.cycles
            assert [r.best_metrics for r in other.per_layer] == \
                [r.best_metrics for r in without.per_layer]

    def test_entry_reproducible_by_rerunning(self, tmp_path):
        cache = ResultCache(tmp_path)
        engine = MappingEngine(ARCH, MAPPER, cache)
        result = engine.search_layer(LAYER, BITS)
        key = cache_key(ARCH, LAYER, BITS, MAPPER)
        record = json.loads((tmp_path / key[:2] / f"{key}.json").read_text())
        rerun = MappingEngine(ARCH, MAPPER, None).search_layer(LAYER, BITS)
        from qmap.mapspace import encode_mapping
        assert record["mapping"] == encode_mapping(rerun.best_mapping)
        assert record["metrics"] == rerun.best_metrics.to_dict()
