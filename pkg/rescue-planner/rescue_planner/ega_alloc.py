"""Enhanced genetic algorithm for task allocation.

A chromosome is a giant tour: one permutation of all task ids plus ``N-1``
sorted break indices that cut it into per-vehicle routes (segment ``i`` goes to
the ``i``-th vehicle of the fleet). Fitness uses straight-line closed tours
base -> tasks -> base with additive penalties for range, energy and payload
violations. The two enhancements over a plain GA are the decaying mutation
rate ``mu0 * exp(-alpha * g / G)`` and elite preservation. On top of those the
initial population carries a cheapest-insertion seed and the best individual of
every generation is polished by a local descent on its critical route.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .determinism import rng_for
from .env_model import Environment
from .errors import InvalidChromosomeError, PreconditionError
from .fleet_model import Fleet, route_feasible
from .runtime import map_ordered

logger = logging.getLogger(__name__)

MAKESPAN_TIE_BREAK = 1e-6
LOCAL_SEARCH_ROUNDS = 50


class Objective(str, Enum):
    TOTAL_DISTANCE = "total_distance"
    MAKESPAN = "makespan"
    WEIGHTED = "weighted"


@dataclass(frozen=True)
class EgaParams:
    population_size: int = 100
    generations: int = 200
    mu0: float = 0.3
    alpha: float = 2.0
    elite_fraction: float = 0.05
    tournament_size: int = 3
    penalty_weight: Optional[float] = None  # None -> 10 x world diagonal
    seed: int = 0
    objective: Objective = Objective.TOTAL_DISTANCE
    w_time: float = 1.0
    w_dist: float = 1.0
    crossover_rate: float = 1.0
    seeded_init: bool = True
    local_search: bool = True

    def __post_init__(self):
        object.__setattr__(self, "objective", Objective(self.objective))
        if not isinstance(self.population_size, int) or self.population_size < 2:
            raise ValueError("population_size must be an integer >= 2")
        if not isinstance(self.generations, int) or self.generations < 1:
            raise ValueError("generations must be an integer >= 1")
        if not (0 < self.mu0 <= 1):
            raise ValueError("mu0 must be in (0, 1]")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not (0 <= self.elite_fraction < 1):
            raise ValueError("elite_fraction must be in [0, 1)")
        if not isinstance(self.tournament_size, int) or self.tournament_size < 2:
            raise ValueError("tournament_size must be an integer >= 2")
        if self.penalty_weight is not None and self.penalty_weight < 0:
            raise ValueError("penalty_weight must be >= 0")
        if not (0 <= self.crossover_rate <= 1):
            raise ValueError("crossover_rate must be in [0, 1]")
        if self.w_time < 0 or self.w_dist < 0:
            raise ValueError("objective weights must be >= 0")
        if not (isinstance(self.seeded_init, bool) and isinstance(self.local_search, bool)):
            raise ValueError("seeded_init and local_search must be booleans")

    def resolved_penalty(self, env: Environment) -> float:
        if self.penalty_weight is not None:
            return float(self.penalty_weight)
        return 10.0 * 2.0 * math.sqrt(2.0) * env.half_extent

    def to_dict(self) -> dict:
        d = asdict(self)
        d["objective"] = self.objective.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "EgaParams":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown ega parameter(s): {', '.join(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Chromosome:
    task_order: Tuple[int, ...]
    breaks: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "task_order", tuple(int(t) for t in self.task_order))
        object.__setattr__(self, "breaks", tuple(int(b) for b in self.breaks))

    @property
    def n_vehicles(self) -> int:
        return len(self.breaks) + 1

    def bounds(self) -> List[Tuple[int, int]]:
        cuts = (0,) + self.breaks + (len(self.task_order),)
        return [(cuts[i], cuts[i + 1]) for i in range(len(cuts) - 1)]

    def segments(self) -> List[Tuple[int, ...]]:
        return [self.task_order[lo:hi] for lo, hi in self.bounds()]

    @classmethod
    def from_routes(cls, routes: Sequence[Sequence[int]]) -> "Chromosome":
        """Giant tour of ``routes`` in vehicle order, breaks at the cumulative lengths."""
        breaks, n = [], 0
        for r in routes[:-1]:
            n += len(r)
            breaks.append(n)
        return cls(tuple(t for r in routes for t in r), tuple(breaks))

    def validate(self, task_ids: Iterable[int], n_vehicles: int) -> None:
        expected = sorted(task_ids)
        if sorted(self.task_order) != expected:
            seen, dup = set(), set()
            for t in self.task_order:
                (dup if t in seen else seen).add(t)
            missing = sorted(set(expected) - seen)
            raise InvalidChromosomeError(f"task_order is not a permutation (duplicates={sorted(dup)}, missing={missing})")
        if len(self.breaks) != n_vehicles - 1:
            raise InvalidChromosomeError(f"expected {n_vehicles - 1} breaks, got {len(self.breaks)}")
        m = len(self.task_order)
        if any(b < 0 or b > m for b in self.breaks) or list(self.breaks) != sorted(self.breaks):
            raise InvalidChromosomeError(f"breaks must be sorted within [0, {m}], got {self.breaks}")


@dataclass(frozen=True)
class Assignment:
    routes: Dict[int, Tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(self, "routes", {int(v): tuple(int(t) for t in r) for v, r in self.routes.items()})

    def route(self, vehicle_id: int) -> Tuple[int, ...]:
        return self.routes.get(vehicle_id, ())

    def assigned_tasks(self) -> List[int]:
        return [t for r in self.routes.values() for t in r]

    def is_partition(self, task_ids: Iterable[int]) -> bool:
        assigned = self.assigned_tasks()
        return len(assigned) == len(set(assigned)) and set(assigned) == set(task_ids)

    def to_dict(self) -> dict:
        return {str(v): list(r) for v, r in self.routes.items()}

    @classmethod
    def from_chromosome(cls, chrom: Chromosome, fleet: Fleet) -> "Assignment":
        return cls({v.id: seg for v, seg in zip(fleet.vehicles, chrom.segments())})

    @classmethod
    def from_routes(cls, fleet: Fleet, routes: Dict[int, Sequence[int]]) -> "Assignment":
        return cls({v.id: tuple(routes.get(v.id, ())) for v in fleet.vehicles})


@dataclass(frozen=True)
class Individual:
    chromosome: Chromosome
    cost: float


@dataclass
class EgaResult:
    best: Assignment
    best_cost: float
    history: List[Tuple[int, float]]
    feasible: bool = True
    best_chromosome: Optional[Chromosome] = None
    generations_run: int = 0
    params: Optional[EgaParams] = field(default=None, repr=False)


class RouteEvaluator:
    """Precomputed distance table for fast closed-tour costs and penalties."""

    def __init__(self, env: Environment, fleet: Fleet, params: EgaParams):
        self.env = env
        self.fleet = fleet
        self.params = params
        self.task_ids = env.task_ids
        self._pos = {t: i for i, t in enumerate(self.task_ids)}
        m = len(self.task_ids)
        pts = np.array([t.location.as_tuple() for t in env.tasks] + [env.base.as_tuple()], dtype=float).reshape(-1, 2)
        diff = pts[:, None, :] - pts[None, :, :]
        self._dist = np.hypot(diff[..., 0], diff[..., 1]).tolist()
        self._base = m
        self._demand = [t.demand for t in env.tasks]
        self._speeds = [v.max_speed for v in fleet.vehicles]
        self.penalty_weight = params.resolved_penalty(env)

    def base_distance(self, task_id: int) -> float:
        return self._dist[self._base][self._pos[task_id]]

    def route_cost(self, route: Sequence[int]) -> float:
        if not route:
            return 0.0
        d = self._dist
        idx = [self._pos[t] for t in route]
        total = d[self._base][idx[0]] + d[idx[-1]][self._base]
        for a, b in zip(idx, idx[1:]):
            total += d[a][b]
        return total

    def route_demand(self, route: Sequence[int]) -> float:
        return float(sum(self._demand[self._pos[t]] for t in route))

    def route_terms(self, index: int, route: Sequence[int]) -> Tuple[float, float]:
        """Closed-tour cost of ``route`` and its total violation on vehicle ``index``."""
        c = self.route_cost(route)
        return c, route_feasible(self.fleet.vehicles[index], c, self.route_demand(route)).total_violation

    def breakdown(self, chrom: Chromosome) -> Tuple[List[float], float]:
        """Per-vehicle route costs and the weighted constraint penalty."""
        terms = [self.route_terms(i, seg) for i, seg in enumerate(chrom.segments())]
        return [c for c, _ in terms], sum(v for _, v in terms) * self.penalty_weight

    def combine(self, costs: Sequence[float], violations: Sequence[float]) -> float:
        """Fitness from per-route terms; equals ``fitness`` of the same routes."""
        return self.objective(costs) + sum(violations) * self.penalty_weight

    def critical_route(self, costs: Sequence[float], violations: Sequence[float]) -> int:
        """Route that dominates the objective: most violated, then longest
        (in time unless the objective is pure distance). Ties go to the lower index."""
        if self.params.objective == Objective.TOTAL_DISTANCE:
            keys = list(zip(violations, costs))
        else:
            keys = [(v, c / s) for c, v, s in zip(costs, violations, self._speeds)]
        return max(range(len(keys)), key=lambda i: (keys[i], -i))

    def objective(self, costs: Sequence[float]) -> float:
        total = float(sum(costs))
        p = self.params
        if p.objective == Objective.TOTAL_DISTANCE:
            return total
        makespan = max((c / v.max_speed for c, v in zip(costs, self.fleet.vehicles)), default=0.0)
        if p.objective == Objective.MAKESPAN:
            return makespan + MAKESPAN_TIE_BREAK * total
        return p.w_time * makespan + p.w_dist * total

    def fitness(self, chrom: Chromosome) -> float:
        costs, penalty = self.breakdown(chrom)
        return self.objective(costs) + penalty

    def check(self, chrom: Chromosome) -> None:
        chrom.validate(self.task_ids, len(self.fleet))


def fitness(chrom: Chromosome, env: Environment, fleet: Fleet, params: EgaParams) -> float:
    """Penalised objective of ``chrom``; lower is better."""
    ev = RouteEvaluator(env, fleet, params)
    ev.check(chrom)
    return ev.fitness(chrom)


def mutation_rate(g: int, params: EgaParams) -> float:
    if not (0 <= g <= params.generations):
        raise ValueError(f"generation {g} outside [0, {params.generations}]")
    return params.mu0 * math.exp(-params.alpha * g / params.generations)


def random_chromosome(task_ids: Sequence[int], n_vehicles: int, rng: np.random.Generator) -> Chromosome:
    order = [task_ids[i] for i in rng.permutation(len(task_ids))]
    breaks = sorted(int(b) for b in rng.integers(0, len(task_ids) + 1, size=n_vehicles - 1))
    return Chromosome(tuple(order), tuple(breaks))


def tournament_select(population: Sequence[Individual], k: int, rng: np.random.Generator, *, replace: bool = True) -> Chromosome:
    """Lowest-cost chromosome among ``k`` uniformly drawn individuals."""
    if not population:
        raise ValueError("population must be non-empty")
    if k < 2:
        raise ValueError("tournament size must be >= 2")
    if replace:
        picks = rng.integers(0, len(population), size=k)
    else:
        picks = rng.choice(len(population), size=min(k, len(population)), replace=False)
    winner = min(picks, key=lambda i: (population[i].cost, i))
    return population[int(winner)].chromosome


def repair_order(order: Sequence[int], task_ids: Sequence[int]) -> Tuple[int, ...]:
    """Replace repeated genes with missing task ids (ascending), keeping first occurrences."""
    missing = sorted(set(task_ids) - set(order))
    if not missing and len(order) == len(task_ids):
        return tuple(order)
    seen, out, fill = set(), [], iter(missing)
    for t in order:
        if t in seen:
            out.append(next(fill))
        else:
            seen.add(t)
            out.append(t)
    out.extend(fill)
    return tuple(out)


def pmx_orders(pa: Sequence[int], pb: Sequence[int], lo: int, hi: int) -> Tuple[List[int], List[int]]:
    """Partially matched crossover on the half-open slice ``[lo, hi)``."""
    n = len(pa)

    def child(donor: Sequence[int], other: Sequence[int]) -> List[int]:
        c = list(other)
        c[lo:hi] = donor[lo:hi]
        middle = set(donor[lo:hi])
        mapping = {donor[i]: other[i] for i in range(lo, hi)}
        for i in list(range(lo)) + list(range(hi, n)):
            gene = other[i]
            while gene in middle:
                gene = mapping[gene]
            c[i] = gene
        return c

    return child(pa, pb), child(pb, pa)


def _clamped_breaks(breaks: Sequence[int], m: int) -> Tuple[int, ...]:
    return tuple(sorted(min(max(int(b), 0), m) for b in breaks))


def pmx_crossover(a: Chromosome, b: Chromosome, rng: np.random.Generator, *, cuts: Optional[Tuple[int, int]] = None) -> Tuple[Chromosome, Chromosome]:
    m = len(a.task_order)
    if m < 2:
        return a, b
    if cuts is None:
        lo, hi = sorted(int(c) for c in rng.choice(m + 1, size=2, replace=False))
    else:
        lo, hi = cuts
        if not (0 <= lo < hi <= m):
            raise ValueError(f"cuts must satisfy 0 <= lo < hi <= {m}, got {cuts}")
    ca, cb = pmx_orders(a.task_order, b.task_order, lo, hi)
    ids = sorted(a.task_order)
    return (
        Chromosome(repair_order(ca, ids), _clamped_breaks(a.breaks, m)),
        Chromosome(repair_order(cb, ids), _clamped_breaks(b.breaks, m)),
    )


def _legal_moves(chrom: Chromosome) -> Dict[str, list]:
    bounds = chrom.bounds()
    non_empty = [i for i, (lo, hi) in enumerate(bounds) if hi > lo]
    reversible = [i for i, (lo, hi) in enumerate(bounds) if hi - lo >= 2]
    m, breaks = len(chrom.task_order), chrom.breaks
    shifts = []
    for i, b in enumerate(breaks):
        floor = breaks[i - 1] if i > 0 else 0
        ceil = breaks[i + 1] if i + 1 < len(breaks) else m
        for delta in (-1, 1):
            if floor <= b + delta <= ceil:
                shifts.append((i, delta))
    moves = {}
    if len(non_empty) >= 2:
        moves["swap"] = non_empty
    if reversible:
        moves["reverse"] = reversible
    if shifts:
        moves["shift"] = shifts
    return moves


def mutate(chrom: Chromosome, rate: float, rng: np.random.Generator) -> Chromosome:
    """With probability ``rate`` apply one legal move chosen uniformly:
    cross-vehicle swap, in-route reversal or a break shift of one position."""
    if rng.random() >= rate:
        return chrom
    moves = _legal_moves(chrom)
    if not moves:
        return chrom
    kind = sorted(moves)[int(rng.integers(0, len(moves)))]
    order, breaks = list(chrom.task_order), list(chrom.breaks)
    bounds = chrom.bounds()
    if kind == "swap":
        s1, s2 = (int(s) for s in rng.choice(moves["swap"], size=2, replace=False))
        p1 = int(rng.integers(*bounds[s1]))
        p2 = int(rng.integers(*bounds[s2]))
        order[p1], order[p2] = order[p2], order[p1]
    elif kind == "reverse":
        s = moves["reverse"][int(rng.integers(0, len(moves["reverse"])))]
        lo, hi = bounds[s]
        i, j = sorted(int(x) for x in rng.choice(hi - lo, size=2, replace=False))
        order[lo + i:lo + j + 1] = order[lo + i:lo + j + 1][::-1]
    else:
        idx, delta = moves["shift"][int(rng.integers(0, len(moves["shift"])))]
        breaks[idx] += delta
    return Chromosome(tuple(order), tuple(breaks))


def _elite_count(params: EgaParams) -> int:
    if params.elite_fraction <= 0:
        return 0
    return min(params.population_size - 1, max(1, math.ceil(params.elite_fraction * params.population_size - 1e-9)))


def greedy_insertion(ev: RouteEvaluator) -> Chromosome:
    """Cheapest-insertion seed. Tasks are taken farthest from the base first
    (ties by id) and each goes to the vehicle and position where the penalised
    objective grows least; ties keep the earlier vehicle and position."""
    n = len(ev.fleet)
    routes: List[List[int]] = [[] for _ in range(n)]
    costs, viols = [0.0] * n, [0.0] * n
    for t in sorted(ev.task_ids, key=lambda t: (-ev.base_distance(t), t)):
        best = None
        for i in range(n):
            kept = costs[i], viols[i]
            for k in range(len(routes[i]) + 1):
                c, v = ev.route_terms(i, routes[i][:k] + [t] + routes[i][k:])
                costs[i], viols[i] = c, v
                score = ev.combine(costs, viols)
                if best is None or score < best[0]:
                    best = (score, i, k, c, v)
            costs[i], viols[i] = kept
        _, i, k, c, v = best
        routes[i].insert(k, t)
        costs[i], viols[i] = c, v
    return Chromosome.from_routes(routes)


def _critical_moves(routes: List[List[int]], crit: int) -> Iterable[Dict[int, List[int]]]:
    own = routes[crit]
    for a, t in enumerate(own):
        rest = own[:a] + own[a + 1:]
        for k in range(len(rest) + 1):
            if k != a:
                yield {crit: rest[:k] + [t] + rest[k:]}
        for j, other in enumerate(routes):
            if j == crit:
                continue
            for k in range(len(other) + 1):
                yield {crit: rest, j: other[:k] + [t] + other[k:]}
            for k, u in enumerate(other):
                yield {crit: own[:a] + [u] + own[a + 1:], j: other[:k] + [t] + other[k + 1:]}
    for a in range(len(own) - 1):
        for b in range(a + 2, len(own) + 1):
            yield {crit: own[:a] + own[a:b][::-1] + own[b:]}


def improve_critical_route(chrom: Chromosome, ev: RouteEvaluator, *, max_rounds: int = LOCAL_SEARCH_ROUNDS) -> Chromosome:
    """Best-improvement descent around the critical route: move one of its
    tasks (within it or to another vehicle), swap one with another vehicle's
    task, or reverse a stretch of it. Returns ``chrom`` itself at a local optimum."""
    routes = [list(s) for s in chrom.segments()]
    terms = [ev.route_terms(i, r) for i, r in enumerate(routes)]
    costs, viols = [c for c, _ in terms], [v for _, v in terms]
    current = ev.combine(costs, viols)
    improved = False
    for _ in range(max_rounds):
        crit = ev.critical_route(costs, viols)
        best = None
        for move in _critical_moves(routes, crit):
            trial_c, trial_v = list(costs), list(viols)
            for i, r in move.items():
                trial_c[i], trial_v[i] = ev.route_terms(i, r)
            score = ev.combine(trial_c, trial_v)
            if score < current and (best is None or score < best[0]):
                best = (score, move, trial_c, trial_v)
        if best is None:
            break
        current, move, costs, viols = best
        for i, r in move.items():
            routes[i] = r
        improved = True
    return Chromosome.from_routes(routes) if improved else chrom


def run_ega(env: Environment, fleet: Fleet, params: EgaParams, *, workers: Optional[int] = None) -> EgaResult:
    """Evolve a task allocation; deterministic for a given ``params.seed``
    whatever the worker count."""
    if not env.tasks:
        raise PreconditionError("run_ega requires at least one task")
    logger.info("run_ega params=%s tasks=%d vehicles=%d", params.to_dict(), len(env.tasks), len(fleet))
    ev = RouteEvaluator(env, fleet, params)
    task_ids = list(ev.task_ids)
    n_veh = len(fleet)
    p = params
    n_elite = _elite_count(p)
    n_off = p.population_size - n_elite
    n_pairs = (n_off + 1) // 2

    seeds = [greedy_insertion(ev)] if p.seeded_init else []
    settled = set()

    def polish(population: List[Individual]) -> Individual:
        """Replace the generation's best by its local-search descendant."""
        i = min(range(len(population)), key=lambda k: (population[k].cost, k))
        ind = population[i]
        if p.local_search and ind.chromosome not in settled:
            c = improve_critical_route(ind.chromosome, ev)
            settled.update((ind.chromosome, c))
            if c != ind.chromosome:
                ind = population[i] = Individual(c, ev.fitness(c))
        return ind

    executor = ThreadPoolExecutor(max_workers=workers) if workers and workers > 1 else None
    try:
        def init(i: int) -> Individual:
            c = seeds[i] if i < len(seeds) else random_chromosome(task_ids, n_veh, rng_for(p.seed, "init", i))
            return Individual(c, ev.fitness(c))

        population = list(map_ordered(init, range(p.population_size), executor=executor))
        best = polish(population)
        history = [(0, best.cost)]

        for g in range(1, p.generations + 1):
            rate = mutation_rate(g, p)
            parents = population

            def breed(j: int) -> List[Individual]:
                rng = rng_for(p.seed, "ega", g, j)
                a = tournament_select(parents, p.tournament_size, rng)
                b = tournament_select(parents, p.tournament_size, rng)
                if rng.random() < p.crossover_rate:
                    a, b = pmx_crossover(a, b, rng)
                kids = (mutate(a, rate, rng), mutate(b, rate, rng))
                return [Individual(k, ev.fitness(k)) for k in kids]

            offspring = [ind for pair in map_ordered(breed, range(n_pairs), executor=executor) for ind in pair][:n_off]
            ranked = sorted(range(len(population)), key=lambda i: (population[i].cost, i))
            elites = [population[i] for i in ranked[:n_elite]]
            population = elites + offspring
            for ind in population:
                ev.check(ind.chromosome)
            gen_best = polish(population)
            if gen_best.cost < best.cost:
                best = gen_best
            history.append((g, gen_best.cost))
    finally:
        if executor is not None:
            executor.shutdown()

    _, penalty = ev.breakdown(best.chromosome)
    feasible = penalty == 0.0
    if not feasible:
        logger.warning("run_ega: no feasible assignment found; best carries penalty %.3f", penalty)
    return EgaResult(
        best=Assignment.from_chromosome(best.chromosome, fleet),
        best_cost=best.cost,
        history=history,
        feasible=feasible,
        best_chromosome=best.chromosome,
        generations_run=p.generations,
        params=params,
    )


def standard_params(params: EgaParams) -> EgaParams:
    """Plain-GA variant: constant mutation rate, random initial population,
    no elitism and no local search."""
    return replace(params, alpha=0.0, elite_fraction=0.0, seeded_init=False, local_search=False)
