"""CMA-ES over random keys for per-vehicle visiting order.

Candidate key vectors are decoded by a stable argsort into a visiting order and
scored as a closed tour from the base. The search starts from the incumbent
order (keys = rank / n), so the returned order is never worse than the one it
was given. Sampling is scaled by the step size sigma, which is adapted by
cumulative step-size control.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .env_model import Point
from .errors import PreconditionError

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-12

CostFn = Callable[[Sequence[int]], float]


@dataclass(frozen=True)
class CmaesParams:
    lam: Optional[int] = None  # None -> 4 + floor(3 ln n)
    mu: Optional[int] = None  # None -> lam // 2
    sigma0: float = 0.3
    max_generations: int = 300
    stagnation_window: int = 40
    restarts: int = 2
    seed: int = 0

    def __post_init__(self):
        if not (self.sigma0 > 0):
            raise ValueError("sigma0 must be > 0")
        if not isinstance(self.max_generations, int) or self.max_generations < 1:
            raise ValueError("max_generations must be an integer >= 1")
        if not isinstance(self.stagnation_window, int) or self.stagnation_window < 1:
            raise ValueError("stagnation_window must be an integer >= 1")
        if not isinstance(self.restarts, int) or self.restarts < 0:
            raise ValueError("restarts must be an integer >= 0")
        if self.lam is not None and self.lam < 2:
            raise ValueError("lambda must be >= 2")
        if self.mu is not None:
            if self.mu < 1:
                raise ValueError("mu must be >= 1")
            if self.lam is not None and self.mu > self.lam:
                raise ValueError("mu must not exceed lambda")

    def population_for(self, n: int) -> Tuple[int, int]:
        lam = self.lam if self.lam is not None else 4 + int(math.floor(3 * math.log(max(n, 1))))
        mu = self.mu if self.mu is not None else lam // 2
        return lam, max(1, min(mu, lam))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "CmaesParams":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown cmaes parameter(s): {', '.join(unknown)}")
        return cls(**data)


@dataclass
class CmaesState:
    mean: np.ndarray
    covariance: np.ndarray
    step_scale: float
    evolution_path: np.ndarray
    sigma_path: np.ndarray
    generation: int = 0


@dataclass(frozen=True)
class StrategyConstants:
    lam: int
    mu: int
    weights: Tuple[float, ...]
    mueff: float
    cc: float
    cs: float
    c1: float
    cmu: float
    damps: float

    @classmethod
    def for_dimension(cls, n: int, lam: int, mu: int) -> "StrategyConstants":
        raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
        w = raw / raw.sum()
        mueff = 1.0 / float(np.sum(w ** 2))
        cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        cs = (mueff + 2) / (n + mueff + 5)
        c1 = 2 / ((n + 1.3) ** 2 + mueff)
        cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        damps = 2 * mueff / lam + 0.3 + cs
        return cls(lam, mu, tuple(float(x) for x in w), mueff, cc, cs, c1, cmu, damps)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "weights"}


@dataclass
class SequenceResult:
    order: Tuple[int, ...]
    cost: float
    history: List[Tuple[int, float]] = field(default_factory=list)
    metadata: Dict[str, object] = field(default_factory=dict)


def decode_keys(keys: Sequence[float]) -> Tuple[int, ...]:
    arr = np.asarray(keys, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("keys must be finite")
    return tuple(int(i) for i in np.argsort(arr, kind="stable"))


def encode_order(order: Sequence[int]) -> np.ndarray:
    """Keys whose stable argsort reproduces ``order`` (key = rank / n)."""
    n = len(order)
    keys = np.empty(n, dtype=float)
    for rank, idx in enumerate(order):
        keys[idx] = rank / n
    return keys


def _distance_table(locations: Sequence[Point], base: Point) -> np.ndarray:
    pts = np.array([p.as_tuple() for p in locations] + [base.as_tuple()], dtype=float).reshape(-1, 2)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def tour_cost(order: Sequence[int], locations: Sequence[Point], base: Point) -> float:
    if not order:
        return 0.0
    stops = [base] + [locations[i] for i in order] + [base]
    return float(sum(math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(stops, stops[1:])))


def table_cost_fn(table: np.ndarray) -> CostFn:
    """Closed-tour cost over a square table whose last row/column is the base."""
    base = table.shape[0] - 1

    def cost(order: Sequence[int]) -> float:
        if not len(order):
            return 0.0
        idx = np.asarray(order)
        return float(table[base, idx[0]] + table[idx[:-1], idx[1:]].sum() + table[idx[-1], base])

    return cost


def improvement_report(before_cost: float, after_cost: float) -> float:
    if not (before_cost > 0):
        raise ValueError("before_cost must be > 0")
    return (before_cost - after_cost) / before_cost


def _repair(cov: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    cov = (cov + cov.T) / 2.0
    eigvals, basis = np.linalg.eigh(cov)
    repaired = bool(eigvals.min() < EIGEN_FLOOR)
    if repaired:
        eigvals = np.maximum(eigvals, EIGEN_FLOOR)
        cov = (basis * eigvals) @ basis.T
        cov = (cov + cov.T) / 2.0
    return cov, eigvals, basis, repaired


def _checked(value: float) -> float:
    if not math.isfinite(value):
        raise PreconditionError(f"sequence objective is not finite ({value})")
    return value


def optimize_sequence(
    locations: Sequence[Point],
    base: Point,
    params: CmaesParams,
    *,
    cost_fn: Optional[CostFn] = None,
    incumbent: Optional[Sequence[int]] = None,
    on_generation: Optional[Callable[[CmaesState], None]] = None,
) -> SequenceResult:
    """Find a low-cost visiting order over ``locations`` (indices into it).

    ``incumbent`` defaults to the input order and seeds the initial mean.
    """
    n = len(locations)
    cost = cost_fn or table_cost_fn(_distance_table(locations, base))
    start = tuple(int(i) for i in incumbent) if incumbent is not None else tuple(range(n))
    if sorted(start) != list(range(n)):
        raise ValueError("incumbent must be a permutation of the location indices")
    if n <= 1:
        c = _checked(cost(start))
        return SequenceResult(start, c, [(0, c)], {"generations": 0, "evaluations": 1, "stop": "trivial"})

    lam0, mu0 = params.population_for(n)
    logger.debug("optimize_sequence n=%d lambda=%d mu=%d params=%s", n, lam0, mu0, params.to_dict())
    rng = np.random.default_rng(params.seed)
    best_order = start
    best_cost = _checked(cost(start))
    history: List[Tuple[int, float]] = [(0, best_cost)]
    generation = 0
    evaluations = 1
    repairs = 0
    stop = "max_generations"
    first_constants: Optional[StrategyConstants] = None
    chi_n = math.sqrt(n) * (1 - 1.0 / (4 * n) + 1.0 / (21 * n ** 2))

    for restart in range(params.restarts + 1):
        lam = lam0 * (2 ** restart)
        mu = mu0 * (2 ** restart) if params.mu is None else min(params.mu, lam)
        k = StrategyConstants.for_dimension(n, lam, mu)
        first_constants = first_constants or k
        w = np.asarray(k.weights)
        state = CmaesState(
            mean=encode_order(best_order),
            covariance=np.eye(n),
            step_scale=params.sigma0,
            evolution_path=np.zeros(n),
            sigma_path=np.zeros(n),
        )
        eigvals, basis = np.ones(n), np.eye(n)
        since_improvement = 0
        local_evals = 0
        stop = "max_generations"
        for _ in range(params.max_generations):
            generation += 1
            state.generation += 1
            z = rng.standard_normal((lam, n))
            y = (z * np.sqrt(eigvals)) @ basis.T
            x = state.mean + state.step_scale * y
            scores = np.empty(lam)
            orders = []
            for i in range(lam):
                order = decode_keys(x[i])
                orders.append(order)
                scores[i] = _checked(cost(order))
            evaluations += lam
            local_evals += lam
            rank = np.argsort(scores, kind="stable")
            if scores[rank[0]] < best_cost:
                best_cost = float(scores[rank[0]])
                best_order = orders[int(rank[0])]
                since_improvement = 0
            else:
                since_improvement += 1
            history.append((generation, best_cost))

            old_mean = state.mean
            selected = x[rank[:mu]]
            state.mean = w @ selected
            step = (state.mean - old_mean) / state.step_scale
            inv_sqrt = (basis / np.sqrt(eigvals)) @ basis.T
            state.sigma_path = (1 - k.cs) * state.sigma_path + math.sqrt(k.cs * (2 - k.cs) * k.mueff) * (inv_sqrt @ step)
            ps_norm2 = float(state.sigma_path @ state.sigma_path)
            hsig = ps_norm2 / n / (1 - (1 - k.cs) ** (2 * local_evals / lam)) < 2 + 4.0 / (n + 1)
            state.evolution_path = (1 - k.cc) * state.evolution_path + hsig * math.sqrt(k.cc * (2 - k.cc) * k.mueff) * step
            c1a = k.c1 * (1 - (1 - hsig ** 2) * k.cc * (2 - k.cc))
            deltas = (selected - old_mean) / state.step_scale
            rank_mu = (deltas.T * w) @ deltas
            cov = (1 - c1a - k.cmu) * state.covariance + k.c1 * np.outer(state.evolution_path, state.evolution_path) + k.cmu * rank_mu
            state.covariance, eigvals, basis, repaired = _repair(cov)
            repairs += int(repaired)
            state.step_scale *= math.exp(min(1.0, (k.cs / k.damps) * (math.sqrt(ps_norm2) / chi_n - 1)))
            if on_generation is not None:
                on_generation(state)
            if since_improvement >= params.stagnation_window:
                stop = "stagnation"
                break
        logger.debug("restart %d ended (%s) at generation %d, best %.3f", restart, stop, generation, best_cost)

    metadata: Dict[str, object] = {
        "generations": generation,
        "evaluations": evaluations,
        "restarts": params.restarts,
        "eigen_repairs": repairs,
        "stop": stop,
    }
    if first_constants is not None:
        metadata.update(first_constants.to_dict())
    return SequenceResult(tuple(int(i) for i in best_order), best_cost, history, metadata)
