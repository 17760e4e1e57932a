"""Quantization-aware mapping of CNN layers onto spatial accelerators.

The package couples a bit-packing-aware analytical cost model for
parameterized spatial accelerators with an NSGA-II search over per-layer
activation/weight bit-widths, trading network accuracy against the
energy-delay product of one inference.
"""

__version__ = "0.1.0"

from .arch import ArchitectureSpec, MemoryLevel, SpatialFanout, canonical_hash, parse_arch, serialize_arch
from .cache import ResultCache, cache_key
from .costmodel import Evaluator, MappingMetrics, access_counts, evaluate, tile_footprint
from .engine import MappingEngine, NetworkMetrics, NoValidMappingError
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
from .oracle import ExternalOracle, OraclePool, surrogate_accuracy
from .packing import packing_factor, words_needed
from .search import SearchConfig, SearchResult, run_search
from .workload import (
    LayerKind,
    LayerWorkload,
    NetworkSpec,
    QuantConfig,
    TensorBits,
    decode_genome,
    encode_genome,
    layer_macs,
    model_size_bits,
    parse_network,
    uniform_genome,
)

__all__ = [name for name in dir() if not name.startswith("_")]
