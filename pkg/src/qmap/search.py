"""NSGA-II search over per-layer bit-width genomes.

Objectives: maximize top-1 accuracy, minimize whole-network EDP.  The
population starts from the uniform quantization settings; offspring are
produced by uniform crossover of two tournament-selected parents followed by
two independent mutation operators: with probability p_mut_acc one random
layer is reset to the 8/8 starting point, and with probability p_mut one
random gene is replaced by a fresh value in range.  Both may fire on the
same offspring.

Every stochastic decision of generation g, offspring i draws from an RNG
seeded by (seed, g, i), so results do not depend on evaluation scheduling.
The archive accumulates every evaluated individual; the final front is the
dominance filter over the whole archive.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .arch import ArchitectureSpec
from .cache import ResultCache
from .engine import MappingEngine, NoValidMappingError
from .mapspace import MapperConfig
from .workload import (
    GENE_MAX,
    GENE_MIN,
    Genome,
    NetworkSpec,
    decode_genome,
    uniform_genome,
)

log = logging.getLogger(__name__)

Oracle = Callable[[Genome, NetworkSpec], float]


class OracleError(RuntimeError):
    pass


@dataclass
class Individual:
    genome: Genome
    accuracy: float | None = None
    edp: float | None = None
    rank: int | None = None
    crowding: float | None = None

    @property
    def objectives(self) -> tuple[float, float]:
        assert self.accuracy is not None and self.edp is not None
        return (self.accuracy, self.edp)


@dataclass(frozen=True)
class SearchConfig:
    population: int = 32
    offspring: int = 16
    p_mut: float = 0.10
    p_mut_acc: float = 0.05
    generations: int = 20
    wall_clock_budget_s: float | None = None
    seed: int = 0
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.offspring < 1:
            raise ValueError("offspring must be >= 1")
        for name in ("p_mut", "p_mut_acc"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def canonical_dict(self) -> dict:
        return {
            "population": self.population,
            "offspring": self.offspring,
            "p_mut": self.p_mut,
            "p_mut_acc": self.p_mut_acc,
            "generations": self.generations,
            "wall_clock_budget_s": self.wall_clock_budget_s,
            "seed": self.seed,
            "jobs": self.jobs,
        }


@dataclass(frozen=True)
class MutationReport:
    layer_reset_fired: bool
    gene_replace_fired: bool


@dataclass
class SearchResult:
    archive: list[Individual]
    snapshots: list[list[Individual]]
    evaluations: int
    failed: int


# -- variation operators ----------------------------------------------------------


def uniform_crossover(a: Genome, b: Genome, rng: np.random.Generator) -> Genome:
    """Child takes each gene from either parent with a fair coin."""
    if len(a) != len(b):
        raise ValueError(f"parent length mismatch: {len(a)} != {len(b)}")
    coins = rng.random(len(a)) < 0.5
    return tuple(a[i] if coins[i] else b[i] for i in range(len(a)))


def mutate_with_report(
    genome: Genome, rng: np.random.Generator, p_mut: float, p_mut_acc: float
) -> tuple[Genome, MutationReport]:
    genes = list(genome)
    layer_reset = rng.random() < p_mut_acc
    if layer_reset:
        layer = int(rng.integers(len(genes) // 2))
        genes[2 * layer] = 8
        genes[2 * layer + 1] = 8
    gene_replace = rng.random() < p_mut
    if gene_replace:
        idx = int(rng.integers(len(genes)))
        genes[idx] = int(rng.integers(GENE_MIN, GENE_MAX + 1))
    return tuple(genes), MutationReport(layer_reset, gene_replace)


def mutate(genome: Genome, rng: np.random.Generator, p_mut: float, p_mut_acc: float) -> Genome:
    return mutate_with_report(genome, rng, p_mut, p_mut_acc)[0]


# -- NSGA-II machinery ------------------------------------------------------------


def dominates(a: tuple[float, float], b: tuple[float, float]) -> bool:
    """(accuracy, edp): a dominates b iff no worse in both and better in one."""
    acc_a, edp_a = a
    acc_b, edp_b = b
    return acc_a >= acc_b and edp_a <= edp_b and (acc_a > acc_b or edp_a < edp_b)


def nondominated_sort(pop: list[Individual]) -> list[list[int]]:
    """Fast non-dominated sort; returns fronts as lists of indices into pop."""
    n = len(pop)
    objs = [ind.objectives for ind in pop]
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(objs[i], objs[j]):
                dominated_by[i].append(j)
                domination_count[j] += 1
            elif dominates(objs[j], objs[i]):
                dominated_by[j].append(i)
                domination_count[i] += 1
    fronts: list[list[int]] = []
    current = [i for i in range(n) if domination_count[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    for rank, front in enumerate(fronts):
        for i in front:
            pop[i].rank = rank
    return fronts


def crowding_distance(front: list[Individual]) -> list[float]:
    """Canonical crowding distance: boundary points infinite, interior points
    accumulate objective-normalized neighbor gaps.  The per-objective sort
    breaks value ties on the full objective pair, so assigned distances do
    not depend on input order (clones excepted, which are interchangeable)."""
    n = len(front)
    if n == 0:
        return []
    if n <= 2:
        for ind in front:
            ind.crowding = float("inf")
        return [float("inf")] * n
    distance = [0.0] * n
    for objective in range(2):
        values = [ind.objectives[objective] for ind in front]
        order = sorted(range(n), key=lambda i: (values[i], front[i].objectives))
        distance[order[0]] = float("inf")
        distance[order[-1]] = float("inf")
        span = values[order[-1]] - values[order[0]]
        if span == 0:
            continue
        for pos in range(1, n - 1):
            i = order[pos]
            if distance[i] != float("inf"):
                distance[i] += (values[order[pos + 1]] - values[order[pos - 1]]) / span
    for ind, d in zip(front, distance):
        ind.crowding = d
    return distance


def _binary_tournament(pop: list[Individual], rng: np.random.Generator) -> Individual:
    i, j = int(rng.integers(len(pop))), int(rng.integers(len(pop)))
    a, b = pop[i], pop[j]
    if (a.rank, -(a.crowding or 0.0)) <= (b.rank, -(b.crowding or 0.0)):
        return a
    return b


def _environmental_selection(pop: list[Individual], size: int) -> list[Individual]:
    fronts = nondominated_sort(pop)
    selected: list[Individual] = []
    for front_indices in fronts:
        front = [pop[i] for i in front_indices]
        crowding_distance(front)
        if len(selected) + len(front) <= size:
            selected.extend(front)
        else:
            remaining = size - len(selected)
            order = sorted(range(len(front)),
                           key=lambda k: (-(front[k].crowding or 0.0), front_indices[k]))
            selected.extend(front[k] for k in order[:remaining])
            break
    return selected


def pareto_filter(individuals: list[Individual]) -> list[Individual]:
    """Dominance filter; result sorted by (edp, -accuracy, genome)."""
    front = [
        a for a in individuals
        if not any(dominates(b.objectives, a.objectives) for b in individuals if b is not a)
    ]
    return sorted(front, key=lambda ind: (ind.edp, -ind.accuracy, ind.genome))


def hypervolume(points: list[tuple[float, float]], ref: tuple[float, float]) -> float:
    """2D hypervolume of (accuracy up, edp down) points against ref=(acc_floor, edp_ceiling)."""
    acc_floor, edp_ceiling = ref
    kept = [(acc, edp) for acc, edp in points if acc > acc_floor and edp < edp_ceiling]
    if not kept:
        return 0.0
    kept.sort(key=lambda p: (p[1], -p[0]))  # by edp ascending
    volume = 0.0
    best_acc = acc_floor
    for acc, edp in kept:
        if acc > best_acc:
            volume += (edp_ceiling - edp) * (acc - best_acc)
            best_acc = acc
    return volume


# -- search driver ----------------------------------------------------------------


def initial_population(net: NetworkSpec, cfg: SearchConfig) -> list[Individual]:
    """Uniform settings for every width in range, padded with mutated 8/8 copies."""
    genomes: list[Genome] = []
    for bits in range(GENE_MAX, GENE_MIN - 1, -1):
        if len(genomes) >= cfg.population:
            break
        genomes.append(uniform_genome(net, bits))
    base = uniform_genome(net, 8)
    index = 0
    while len(genomes) < cfg.population:
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 1, index)))
        genomes.append(mutate(base, rng, cfg.p_mut, cfg.p_mut_acc))
        index += 1
    return [Individual(genome=g) for g in genomes]


def _rng_for(seed: int, generation: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, 2, generation, index)))


def run_search(
    net: NetworkSpec,
    arch: ArchitectureSpec,
    cfg: SearchConfig,
    oracle: Oracle,
    mapper: MapperConfig | None = None,
    cache: ResultCache | None = None,
    on_generation: Callable[[int, list[Individual]], None] | None = None,
) -> SearchResult:
    mapper = mapper or MapperConfig()
    engine = MappingEngine(arch, mapper, cache)
    archive: dict[Genome, Individual] = {}
    evaluations = 0
    failed = 0

    def evaluate_one(ind: Individual) -> Individual | None:
        qcfg = decode_genome(ind.genome, net)
        try:
            ind.edp = engine.network_metrics(net, qcfg).edp_pj_cycles
        except NoValidMappingError as exc:
            log.warning("genome %s: %s; assigning infinite EDP", ind.genome, exc)
            ind.edp = float("inf")
        try:
            ind.accuracy = oracle(ind.genome, net)
        except OracleError as exc:
            log.warning("oracle failed for genome %s, excluding individual: %s", ind.genome, exc)
            return None
        return ind

    def evaluate_all(batch: list[Individual]) -> list[Individual]:
        nonlocal evaluations, failed
        if cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                results = list(pool.map(evaluate_one, batch))
        else:
            results = [evaluate_one(ind) for ind in batch]
        survivors = [ind for ind in results if ind is not None]
        evaluations += len(survivors)
        failed += len(results) - len(survivors)
        for ind in survivors:
            archive.setdefault(ind.genome, ind)
        return survivors

    start = time.monotonic()
    population = evaluate_all(initial_population(net, cfg))
    fronts = nondominated_sort(population)
    for front_indices in fronts:
        crowding_distance([population[i] for i in front_indices])

    snapshots: list[list[Individual]] = []
    for generation in range(cfg.generations):
        if cfg.wall_clock_budget_s is not None and time.monotonic() - start > cfg.wall_clock_budget_s:
            log.info("wall-clock budget exhausted after %d generations", generation)
            break
        offspring = []
        for i in range(cfg.offspring):
            rng = _rng_for(cfg.seed, generation, i)
            parent_a = _binary_tournament(population, rng)
            parent_b = _binary_tournament(population, rng)
            child = uniform_crossover(parent_a.genome, parent_b.genome, rng)
            child = mutate(child, rng, cfg.p_mut, cfg.p_mut_acc)
            offspring.append(Individual(genome=child))
        evaluated = evaluate_all(offspring)
        population = _environmental_selection(population + evaluated, cfg.population)
        snapshot = [replace(ind) for ind in pareto_filter(list(archive.values()))]
        snapshots.append(snapshot)
        if on_generation is not None:
            on_generation(generation, snapshot)

    final = pareto_filter(list(archive.values()))
    return SearchResult(archive=final, snapshots=snapshots, evaluations=evaluations, failed=failed)
