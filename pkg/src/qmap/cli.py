"""Command-line surface: enumerate, map, correlate, search, rerun.

Every command resolves its inputs to a plain parameter dictionary, runs, and
(when an output directory is given) writes its CSV artifacts plus a
manifest.  The manifest embeds the full architecture and network texts along
with every knob, so `qmap rerun manifest.json --out DIR` reproduces the run
bit-exactly.  CSV schemas are versioned (see README) with fixed column
order; files are written atomically.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import shlex
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .arch import canonical_hash, parse_arch
from .cache import ResultCache, default_cache_dir
from .engine import MappingEngine
from .fixtures import resolve_text
from .mapspace import MapperConfig, encode_mapping
from .oracle import ExternalOracle, OraclePool, surrogate_accuracy
from .search import SearchConfig, run_search
from .workload import (
    GENE_MAX,
    GENE_MIN,
    QuantConfig,
    TensorBits,
    decode_genome,
    format_genome,
    model_size_bits,
    network_hash,
    parse_genome_text,
    parse_network,
    uniform_genome,
    weight_count,
)
from .packing import words_needed

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PJ_TO_J = 1e-12


class CliError(SystemExit):
    def __init__(self, message: str):
        print(f"error: {message}", file=sys.stderr)
        super().__init__(2)


# -- small IO helpers --------------------------------------------------------------


def atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as handle:
        handle.write(data)
    os.replace(tmp, path)


def csv_text(header: list[str], rows: list[list]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def print_rows(header: list[str], rows: list[list], fmt: str) -> None:
    if fmt == "csv":
        sys.stdout.write(csv_text(header, rows))
    elif fmt == "json":
        records = [dict(zip(header, row)) for row in rows]
        json.dump(records, sys.stdout, indent=2, default=str)
        sys.stdout.write("\n")
    else:
        widths = [max(len(str(v)) for v in [h] + [r[i] for r in rows]) for i, h in enumerate(header)]
        line = "  ".join(h.ljust(w) for h, w in zip(header, widths))
        print(line)
        print("-" * len(line))
        for row in rows:
            print("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))


def write_manifest(out: Path, command: str, params: dict, extra: dict | None = None,
                   complete: bool = True) -> None:
    arch = parse_arch(params["arch_text"])
    net = parse_network(params["net_text"])
    manifest = {
        "tool": "qmap",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "params": params,
        "arch_hash": f"{canonical_hash(arch):016x}",
        "net_hash": f"{network_hash(net):016x}",
        "net_name": net.name,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "complete": complete,
    }
    if extra:
        manifest.update(extra)
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")


# -- shared argument handling ------------------------------------------------------


def common_options(parser: argparse.ArgumentParser, mapper_default: str = "random") -> None:
    parser.add_argument("--arch", required=True, help="architecture file or bundled fixture name")
    parser.add_argument("--net", required=True, help="network file or bundled fixture name")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--cache-dir", default=None,
                        help=f"cache directory (default $QMAP_CACHE_DIR or {default_cache_dir()})")
    parser.add_argument("--no-cache", action="store_true")
    parser.add_argument("--format", choices=("csv", "table", "json"), default="table")
    parser.add_argument("--out", default=None, help="directory for CSV artifacts and the manifest")
    parser.add_argument("--mapper", choices=("exhaustive", "random"), default=mapper_default)
    parser.add_argument("--valid-target", type=int, default=2000,
                        help="random mode: stop after this many valid mappings")
    parser.add_argument("--sample-budget", type=int, default=200_000)
    parser.add_argument("--enum-ceiling", type=int, default=100_000_000)


def base_params(args: argparse.Namespace) -> dict:
    return {
        "arch": args.arch,
        "arch_text": resolve_text(args.arch, "arch"),
        "net": args.net,
        "net_text": resolve_text(args.net, "net"),
        "seed": args.seed,
        "jobs": args.jobs,
        "cache_dir": args.cache_dir,
        "no_cache": args.no_cache,
        "mapper": {
            "mode": args.mapper,
            "valid_target": args.valid_target,
            "sample_budget": args.sample_budget,
            "seed": args.seed,
            "enum_ceiling": args.enum_ceiling,
        },
    }


def build_engine(params: dict) -> tuple:
    arch = parse_arch(params["arch_text"])
    net = parse_network(params["net_text"])
    mapper = MapperConfig(**params["mapper"])
    cache = None
    if not params.get("no_cache", False):
        cache_dir = params.get("cache_dir") or default_cache_dir()
        cache = ResultCache(cache_dir)
    return arch, net, MappingEngine(arch, mapper, cache)


def parse_bits_list(text: str) -> list[TensorBits]:
    settings = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [int(v) for v in chunk.split(",")]
        if len(parts) != 3:
            raise CliError(f"bit setting {chunk!r} must be activation,weight,output")
        settings.append(TensorBits(*parts))
    if not settings:
        raise CliError("no bit settings given")
    return settings


def parse_quant(text: str, net) -> QuantConfig:
    if text.startswith("uniform:"):
        return QuantConfig.uniform(net, int(text.removeprefix("uniform:")))
    return decode_genome(parse_genome_text(text), net)


# -- enumerate ---------------------------------------------------------------------


ENUM_HEADER = ["activation_bits", "weight_bits", "output_bits",
               "valid_mappings", "min_edp_j_cycles", "best_mapping"]


def run_enumerate(params: dict) -> list[list]:
    arch, net, engine = build_engine(params)
    try:
        layer = net.layer_named(params["layer"])
    except KeyError:
        raise CliError(f"unknown layer {params['layer']!r}; network has "
                       f"{', '.join(l.name for l in net.layers)}")
    rows = []
    for setting in params["bits"]:
        bits = TensorBits(*setting)
        result = engine.count_valid(layer, bits)
        if result.best_metrics is not None:
            edp = result.best_metrics.edp_pj_cycles * PJ_TO_J
            best = encode_mapping(result.best_mapping)
        else:
            edp, best = "", ""
        rows.append([bits.activation, bits.weight, bits.output, result.valid_count, edp, best])
    return rows


def cmd_enumerate(args: argparse.Namespace) -> None:
    params = base_params(args)
    params["layer"] = args.layer
    params["bits"] = [list(b.as_tuple()) for b in parse_bits_list(args.bits)]
    rows = run_enumerate(params)
    print_rows(ENUM_HEADER, rows, args.format)
    if args.out:
        out = Path(args.out)
        atomic_write(out / "enumerate.csv", csv_text(ENUM_HEADER, rows))
        write_manifest(out, "enumerate", params)


# -- map ---------------------------------------------------------------------------


def map_header(arch) -> list[str]:
    per_level = [f"energy_pj_mem_{lvl.name}" for lvl in arch.levels]
    return ["layer"] + per_level + ["energy_pj_mem_total", "energy_pj_mac",
                                    "energy_pj_total", "cycles", "edp_j_cycles"]


def run_map(params: dict) -> tuple[list[str], list[list]]:
    arch, net, engine = build_engine(params)
    qcfg = parse_quant(params["quant"], net)
    metrics = engine.network_metrics(net, qcfg)
    rows = []
    for layer, result in zip(net.layers, metrics.per_layer):
        m = result.best_metrics
        rows.append(
            [layer.name]
            + [e for e in m.per_level_memory_energy_pj]
            + [m.memory_energy_pj, m.mac_energy_pj, m.total_energy_pj, m.cycles,
               m.edp_pj_cycles * PJ_TO_J]
        )
    rows.append(
        ["TOTAL"]
        + [e for e in metrics.per_level_memory_energy_pj]
        + [metrics.memory_energy_pj, metrics.mac_energy_pj, metrics.energy_pj,
           metrics.cycles, metrics.edp_pj_cycles * PJ_TO_J]
    )
    return map_header(arch), rows


def cmd_map(args: argparse.Namespace) -> None:
    params = base_params(args)
    params["quant"] = args.quant
    header, rows = run_map(params)
    print_rows(header, rows, args.format)
    if args.out:
        out = Path(args.out)
        atomic_write(out / "map.csv", csv_text(header, rows))
        write_manifest(out, "map", params)


# -- correlate ---------------------------------------------------------------------


CORRELATE_HEADER = ["genome", "model_size_bits", "weight_memory_words",
                    "energy_j", "cycles", "edp_j_cycles", "is_reference"]


def _weight_memory_words(net, qcfg, arch) -> int:
    top = arch.holding_levels("Weight")[-1]
    word_bits = arch.levels[top].word_bits
    return sum(
        words_needed(weight_count(layer), qcfg.weight_bits[i], word_bits)
        for i, layer in enumerate(net.layers)
    )


def run_correlate(params: dict) -> tuple[list[list], dict]:
    arch, net, engine = build_engine(params)
    samples = params["samples"]
    rng = np.random.default_rng(np.random.SeedSequence((params["seed"], 3)))
    genomes: list[tuple[int, ...]] = []
    seen = set()
    budget = 100 * samples
    while len(genomes) < samples and budget > 0:
        budget -= 1
        genome = tuple(int(g) for g in rng.integers(GENE_MIN, GENE_MAX + 1, 2 * len(net)))
        if genome not in seen:
            seen.add(genome)
            genomes.append(genome)
    if len(genomes) < samples:
        raise CliError("could not draw enough unique genomes; shrink --samples")

    def evaluate(genome, reference: bool) -> list:
        qcfg = decode_genome(genome, net)
        metrics = engine.network_metrics(net, qcfg)
        return [
            format_genome(genome),
            model_size_bits(net, qcfg),
            _weight_memory_words(net, qcfg, arch),
            metrics.energy_pj * PJ_TO_J,
            metrics.cycles,
            metrics.edp_pj_cycles * PJ_TO_J,
            int(reference),
        ]

    rows = [evaluate(g, False) for g in genomes]
    rows.append(evaluate(uniform_genome(net, 8), True))

    sizes = [r[1] for r in rows if not r[6]]
    words = [r[2] for r in rows if not r[6]]
    edps = [r[5] for r in rows if not r[6]]
    summary = {
        "samples": len(sizes),
        "pearson_size_words": float(stats.pearsonr(sizes, words).statistic),
        "spearman_size_words": float(stats.spearmanr(sizes, words).statistic),
        "pearson_size_edp": float(stats.pearsonr(sizes, edps).statistic),
        "spearman_size_edp": float(stats.spearmanr(sizes, edps).statistic),
    }
    return rows, summary


def cmd_correlate(args: argparse.Namespace) -> None:
    if args.samples < 2:
        raise CliError("--samples must be >= 2")
    params = base_params(args)
    params["samples"] = args.samples
    rows, summary = run_correlate(params)
    print_rows(CORRELATE_HEADER, rows[-5:], args.format)
    print(json.dumps(summary, indent=2))
    if args.out:
        out = Path(args.out)
        atomic_write(out / "correlate.csv", csv_text(CORRELATE_HEADER, rows))
        atomic_write(out / "correlate_summary.json", json.dumps(summary, indent=2) + "\n")
        write_manifest(out, "correlate", params)


# -- search ------------------------------------------------------------------------


PARETO_HEADER = ["genome", "accuracy", "edp_j_cycles", "energy_j", "cycles", "model_size_bits"]
GENERATIONS_HEADER = ["generation", "genome", "accuracy", "edp_j_cycles"]


def _make_oracle(params: dict):
    kind = params.get("oracle", "surrogate")
    if kind == "surrogate":
        return surrogate_accuracy, None
    raw = params.get("oracle_cmd")
    if not raw:
        raise CliError("--oracle external requires --oracle-cmd")
    command = shlex.split(raw) if isinstance(raw, str) else list(raw)
    jobs = params.get("jobs", 1)
    if jobs > 1:
        pool = OraclePool(command, size=jobs, epochs=params.get("oracle_epochs", 0),
                          timeout_s=params.get("oracle_timeout_s", 300.0))
        return pool, pool
    oracle = ExternalOracle(command, epochs=params.get("oracle_epochs", 0),
                            timeout_s=params.get("oracle_timeout_s", 300.0))
    return oracle, oracle


def run_search_command(params: dict, progress: dict | None = None) -> tuple[list[list], list[list]]:
    arch, net, engine = build_engine(params)
    cfg = SearchConfig(**params["search"])
    mapper = MapperConfig(**params["mapper"])
    oracle, closer = _make_oracle(params)
    generation_rows: list[list] = []
    if progress is not None:
        progress["generations"] = generation_rows
        progress["last_front"] = []

    def on_generation(gen: int, snapshot) -> None:
        for ind in snapshot:
            generation_rows.append(
                [gen, format_genome(ind.genome), ind.accuracy, ind.edp * PJ_TO_J])
        if progress is not None:
            progress["last_front"] = [
                [format_genome(ind.genome), ind.accuracy, ind.edp * PJ_TO_J, "", "", ""]
                for ind in snapshot
            ]

    try:
        result = run_search(net, arch, cfg, oracle, mapper=mapper,
                            cache=engine.cache, on_generation=on_generation)
    finally:
        if closer is not None:
            closer.close()

    pareto_rows = []
    for ind in result.archive:
        qcfg = decode_genome(ind.genome, net)
        metrics = engine.network_metrics(net, qcfg)  # served from cache
        pareto_rows.append([
            format_genome(ind.genome),
            ind.accuracy,
            ind.edp * PJ_TO_J,
            metrics.energy_pj * PJ_TO_J,
            metrics.cycles,
            model_size_bits(net, qcfg),
        ])
    return pareto_rows, generation_rows


def cmd_search(args: argparse.Namespace) -> None:
    if args.from_manifest:
        manifest = json.loads(Path(args.from_manifest).read_text())
        if manifest.get("command") != "search":
            raise CliError(f"{args.from_manifest} is not a search manifest")
        params = manifest["params"]
    else:
        params = base_params(args)
        params["search"] = {
            "population": args.population,
            "offspring": args.offspring,
            "p_mut": args.p_mut,
            "p_mut_acc": args.p_mut_acc,
            "generations": args.generations,
            "wall_clock_budget_s": args.budget_seconds,
            "seed": args.seed,
            "jobs": args.jobs,
        }
        params["oracle"] = args.oracle
        params["oracle_cmd"] = args.oracle_cmd
        params["oracle_epochs"] = args.oracle_epochs
        params["oracle_timeout_s"] = args.oracle_timeout
    out = Path(args.out) if args.out else None
    interrupted = False
    progress: dict = {}
    try:
        pareto_rows, generation_rows = run_search_command(params, progress)
    except KeyboardInterrupt:
        interrupted = True
        pareto_rows = progress.get("last_front", [])
        generation_rows = progress.get("generations", [])
        log.warning("interrupted; writing partial results")
    if out is not None:
        atomic_write(out / "pareto.csv", csv_text(PARETO_HEADER, pareto_rows))
        atomic_write(out / "generations.csv", csv_text(GENERATIONS_HEADER, generation_rows))
        write_manifest(out, "search", params, complete=not interrupted)
    if not interrupted:
        print_rows(PARETO_HEADER, pareto_rows, args.format)
    if interrupted:
        raise SystemExit(130)


# -- rerun -------------------------------------------------------------------------


def cmd_rerun(args: argparse.Namespace) -> None:
    manifest = json.loads(Path(args.manifest).read_text())
    command = manifest.get("command")
    params = manifest["params"]
    out = Path(args.out)
    if command == "enumerate":
        rows = run_enumerate(params)
        atomic_write(out / "enumerate.csv", csv_text(ENUM_HEADER, rows))
        write_manifest(out, command, params)
    elif command == "map":
        header, rows = run_map(params)
        atomic_write(out / "map.csv", csv_text(header, rows))
        write_manifest(out, command, params)
    elif command == "correlate":
        rows, summary = run_correlate(params)
        atomic_write(out / "correlate.csv", csv_text(CORRELATE_HEADER, rows))
        atomic_write(out / "correlate_summary.json", json.dumps(summary, indent=2) + "\n")
        write_manifest(out, command, params)
    elif command == "search":
        pareto_rows, generation_rows = run_search_command(params)
        atomic_write(out / "pareto.csv", csv_text(PARETO_HEADER, pareto_rows))
        atomic_write(out / "generations.csv", csv_text(GENERATIONS_HEADER, generation_rows))
        write_manifest(out, command, params)
    else:
        raise CliError(f"manifest command {command!r} is not rerunnable")


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmap", description=__doc__)
    parser.add_argument("--version", action="version", version=f"qmap {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="valid-mapping counts and min EDP per bit setting")
    common_options(p, mapper_default="exhaustive")
    p.add_argument("--layer", required=True, help="layer name within the network")
    p.add_argument("--bits", required=True,
                   help="semicolon-separated activation,weight,output triples, "
                        "e.g. '16,16,16;8,8,8'")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("map", help="per-layer energy/cycle breakdown for one quantization")
    common_options(p)
    p.add_argument("--quant", required=True,
                   help="'uniform:B' or a comma-separated genome string")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("correlate", help="model size vs word count vs EDP over random genomes")
    common_options(p)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("search", help="NSGA-II accuracy/EDP bit-width search")
    common_options(p)
    p.add_argument("--population", type=int, default=32)
    p.add_argument("--offspring", type=int, default=16)
    p.add_argument("--generations", type=int, default=20)
    p.add_argument("--p-mut", type=float, default=0.10)
    p.add_argument("--p-mut-acc", type=float, default=0.05)
    p.add_argument("--budget-seconds", type=float, default=None)
    p.add_argument("--oracle", choices=("surrogate", "external"), default="surrogate")
    p.add_argument("--oracle-cmd", default=None,
                   help="external oracle command line (JSON-lines protocol), one string")
    p.add_argument("--oracle-epochs", type=int, default=0)
    p.add_argument("--oracle-timeout", type=float, default=300.0)
    p.add_argument("--from-manifest", default=None,
                   help="replay a previous search from its manifest")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("rerun", help="reproduce any command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv: list[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args.func(args)


if __name__ == "__main__":
    main()
