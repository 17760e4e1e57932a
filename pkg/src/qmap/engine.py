"""Per-layer mapper driver and whole-network characterization.

Wraps the mapping space and cost model into the operations the studies and
the search engine consume: count valid mappings, find the minimum-EDP
mapping, and sum per-layer metrics into network totals.  Results are served
from the cache when one is attached.

Ties on EDP break on the lexicographically smallest mapping text encoding,
so reductions are deterministic and order-independent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .arch import ArchitectureSpec
from .cache import ResultCache, cache_key
from .costmodel import Evaluator, MappingMetrics
from .mapspace import (
    MapperConfig,
    Mapping,
    Violation,
    check_validity,
    decode_mapping,
    encode_mapping,
    enumerate_mappings,
    sample_mapping,
)
from .workload import LayerWorkload, NetworkSpec, QuantConfig, TensorBits

log = logging.getLogger(__name__)


class NoValidMappingError(RuntimeError):
    def __init__(self, layer: LayerWorkload, tightest: Violation | None):
        detail = f"; tightest violation: {tightest}" if tightest else ""
        super().__init__(f"no valid mapping for layer {layer.name!r}{detail}")
        self.layer = layer
        self.tightest = tightest


@dataclass(frozen=True)
class LayerSearchResult:
    valid_count: int
    examined: int
    best_mapping: Mapping | None
    best_metrics: MappingMetrics | None
    tightest_violation: Violation | None

    def require_best(self, layer: LayerWorkload) -> tuple[Mapping, MappingMetrics]:
        if self.best_mapping is None or self.best_metrics is None:
            raise NoValidMappingError(layer, self.tightest_violation)
        return self.best_mapping, self.best_metrics


@dataclass(frozen=True)
class NetworkMetrics:
    per_layer: tuple[LayerSearchResult, ...]
    energy_pj: float
    memory_energy_pj: float
    mac_energy_pj: float
    per_level_memory_energy_pj: tuple[float, ...]
    cycles: int

    @property
    def edp_pj_cycles(self) -> float:
        return self.energy_pj * self.cycles


def _tightness(v: Violation) -> float:
    if v.capacity_words in (None, 0):
        return float("inf")
    return v.required_words / v.capacity_words


class MappingEngine:
    """Searches layer mapping spaces on one architecture, with memoization."""

    def __init__(self, arch: ArchitectureSpec, mapper: MapperConfig, cache: ResultCache | None = None):
        self.arch = arch
        self.mapper = mapper
        self.cache = cache
        self.mapper_invocations = 0

    def search_layer(self, layer: LayerWorkload, bits: TensorBits) -> LayerSearchResult:
        key = cache_key(self.arch, layer, bits, self.mapper) if self.cache else None
        if key is not None:
            record = self.cache.get(key)
            if record is not None:
                return self._from_record(record)
        result = self._run_mapper(layer, bits)
        if key is not None and result.best_mapping is not None:
            self.cache.put(key, self._to_record(result))
        return result

    def count_valid(self, layer: LayerWorkload, bits: TensorBits) -> LayerSearchResult:
        return self.search_layer(layer, bits)

    def best_mapping(self, layer: LayerWorkload, bits: TensorBits) -> tuple[Mapping, MappingMetrics]:
        return self.search_layer(layer, bits).require_best(layer)

    def network_metrics(self, net: NetworkSpec, qcfg: QuantConfig) -> NetworkMetrics:
        if len(qcfg) != len(net):
            raise ValueError("quant config does not match network")
        results = []
        for i, layer in enumerate(net.layers):
            result = self.search_layer(layer, qcfg.layer_bits(i))
            try:
                result.require_best(layer)
            except NoValidMappingError as exc:
                raise NoValidMappingError(layer, exc.tightest) from None
            results.append(result)
        num_levels = self.arch.num_levels
        per_level = [0.0] * num_levels
        energy = memory = mac = 0.0
        cycles = 0
        for result in results:
            metrics = result.best_metrics
            assert metrics is not None
            for level in range(num_levels):
                per_level[level] += metrics.per_level_memory_energy_pj[level]
            memory += metrics.memory_energy_pj
            mac += metrics.mac_energy_pj
            energy += metrics.total_energy_pj
            cycles += metrics.cycles
        return NetworkMetrics(
            per_layer=tuple(results),
            energy_pj=energy,
            memory_energy_pj=memory,
            mac_energy_pj=mac,
            per_level_memory_energy_pj=tuple(per_level),
            cycles=cycles,
        )

    # -- internals ---------------------------------------------------------------

    def _run_mapper(self, layer: LayerWorkload, bits: TensorBits) -> LayerSearchResult:
        self.mapper_invocations += 1
        evaluator = Evaluator(layer, self.arch)
        best_key: str | None = None
        best: tuple[Mapping, MappingMetrics] | None = None
        tightest: Violation | None = None
        valid = 0
        examined = 0

        def consider(mapping: Mapping) -> bool:
            nonlocal best, best_key, tightest, valid
            violations = check_validity(mapping, layer, self.arch, bits)
            if violations:
                for v in violations:
                    if tightest is None or _tightness(v) < _tightness(tightest):
                        tightest = v
                return False
            valid += 1
            metrics = evaluator.evaluate(mapping, bits)
            key = encode_mapping(mapping)
            if (
                best is None
                or metrics.edp_pj_cycles < best[1].edp_pj_cycles
                or (metrics.edp_pj_cycles == best[1].edp_pj_cycles and key < best_key)
            ):
                best = (mapping, metrics)
                best_key = key
            return True

        if self.mapper.mode == "exhaustive":
            for mapping in enumerate_mappings(layer, self.arch, self.mapper.enum_ceiling):
                examined += 1
                consider(mapping)
        else:
            rng = np.random.default_rng(np.random.SeedSequence(self.mapper.seed))
            while examined < self.mapper.sample_budget and valid < self.mapper.valid_target:
                examined += 1
                consider(sample_mapping(layer, self.arch, rng))
        return LayerSearchResult(
            valid_count=valid,
            examined=examined,
            best_mapping=best[0] if best else None,
            best_metrics=best[1] if best else None,
            tightest_violation=tightest,
        )

    @staticmethod
    def _to_record(result: LayerSearchResult) -> dict:
        assert result.best_mapping is not None and result.best_metrics is not None
        return {
            "mapping": encode_mapping(result.best_mapping),
            "metrics": result.best_metrics.to_dict(),
            "valid_count": result.valid_count,
            "examined": result.examined,
        }

    @staticmethod
    def _from_record(record: dict) -> LayerSearchResult:
        return LayerSearchResult(
            valid_count=record["valid_count"],
            examined=record["examined"],
            best_mapping=decode_mapping(record["mapping"]),
            best_metrics=MappingMetrics.from_dict(record["metrics"]),
            tightest_violation=None,
        )
