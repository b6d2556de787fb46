"""Baseline allocators for comparison runs: random, K-Means and standard GA."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .determinism import rng_for
from .ega_alloc import Assignment, EgaParams, EgaResult, run_ega, standard_params
from .env_model import Environment, Point
from .fleet_model import Fleet

KMEANS_MAX_ITERATIONS = 100
KMEANS_SHIFT_TOLERANCE = 1.0


class BaselineKind(str, Enum):
    """Allocation arms; ``ega`` is the enhanced allocator, the rest are baselines."""

    EGA = "ega"
    STANDARD_GA = "standard-ga"
    KMEANS = "kmeans"
    RANDOM = "random"

    @classmethod
    def parse(cls, value: str) -> "BaselineKind":
        try:
            return cls(value.strip().lower().replace("_", "-"))
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown allocator {value!r} (choose from {choices})") from None


def random_assign(env: Environment, fleet: Fleet, seed: int) -> Assignment:
    """Each task goes to a uniformly drawn vehicle, kept in input order."""
    rng = rng_for(seed, "random")
    routes = {v.id: [] for v in fleet.vehicles}
    ids = fleet.ids
    for t in env.tasks:
        routes[ids[int(rng.integers(0, len(ids)))]].append(t.id)
    return Assignment.from_routes(fleet, routes)


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia_history: List[float] = field(default_factory=list)
    iterations: int = 0


def kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, 2), dtype=float)
    centroids[0] = points[int(rng.integers(0, n))]
    for i in range(1, k):
        d2 = np.min(np.sum((points[:, None, :] - centroids[None, :i, :]) ** 2, axis=2), axis=1)
        total = d2.sum()
        idx = int(rng.choice(n, p=d2 / total)) if total > 0 else int(rng.integers(0, n))
        centroids[i] = points[idx]
    return centroids


def _labels(points: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, float]:
    d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, float(d2[np.arange(len(points)), labels].sum())


def lloyd(points: np.ndarray, k: int, rng: np.random.Generator, *, max_iterations: int = KMEANS_MAX_ITERATIONS, tol: float = KMEANS_SHIFT_TOLERANCE) -> KMeansResult:
    """k-means++ seeding then Lloyd iterations until the largest centroid
    shift drops below ``tol`` metres."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    centroids = kmeans_plusplus(points, k, rng)
    labels, inertia = _labels(points, centroids)
    result = KMeansResult(labels, centroids, [inertia])
    for it in range(1, max_iterations + 1):
        updated = centroids.copy()
        for j in range(k):
            members = points[labels == j]
            if len(members):
                updated[j] = members.mean(axis=0)
            else:
                # empty cluster takes the point farthest from its own centroid
                far = np.sum((points - centroids[labels]) ** 2, axis=1)
                updated[j] = points[int(np.argmax(far))]
        shift = float(np.max(np.hypot(*(updated - centroids).T)))
        centroids = updated
        labels, inertia = _labels(points, centroids)
        result = KMeansResult(labels, centroids, result.inertia_history + [inertia], it)
        if shift < tol:
            break
    return result


def nearest_neighbour_order(env: Environment, task_ids: Sequence[int]) -> Tuple[int, ...]:
    remaining = sorted(task_ids)
    here: Point = env.base
    order = []
    while remaining:
        nxt = min(remaining, key=lambda t: (math.hypot(env.location(t).x - here.x, env.location(t).y - here.y), t))
        remaining.remove(nxt)
        order.append(nxt)
        here = env.location(nxt)
    return tuple(order)


def kmeans_assign(env: Environment, fleet: Fleet, seed: int) -> Assignment:
    """Cluster tasks into ``min(vehicles, tasks)`` groups; the cluster nearest
    the base goes to the first vehicle, and so on. Surplus vehicles stay idle."""
    routes = {v.id: () for v in fleet.vehicles}
    if not env.tasks:
        return Assignment(routes)
    k = min(len(fleet), len(env.tasks))
    points = np.array([t.location.as_tuple() for t in env.tasks], dtype=float)
    km = lloyd(points, k, rng_for(seed, "kmeans"))
    base = env.base.as_array()
    ranked = sorted(range(k), key=lambda j: (float(np.hypot(*(km.centroids[j] - base))), j))
    ids = env.task_ids
    for vehicle, j in zip(fleet.vehicles, ranked):
        members = [ids[i] for i in np.flatnonzero(km.labels == j)]
        routes[vehicle.id] = nearest_neighbour_order(env, members)
    return Assignment(routes)


def standard_ga(env: Environment, fleet: Fleet, params: EgaParams, *, workers: Optional[int] = None) -> EgaResult:
    """run_ega with the mutation decay and elitism switched off."""
    return run_ega(env, fleet, standard_params(params), workers=workers)


def allocate(kind: BaselineKind, env: Environment, fleet: Fleet, params: EgaParams, *, workers: Optional[int] = None) -> Tuple[Assignment, Optional[EgaResult]]:
    """Dispatch one allocation arm; GA arms also return their run record."""
    kind = BaselineKind(kind)
    if kind == BaselineKind.RANDOM:
        return random_assign(env, fleet, params.seed), None
    if kind == BaselineKind.KMEANS:
        return kmeans_assign(env, fleet, params.seed), None
    if not env.tasks:
        return Assignment({v.id: () for v in fleet.vehicles}), None
    result = standard_ga(env, fleet, params, workers=workers) if kind == BaselineKind.STANDARD_GA else run_ega(env, fleet, params, workers=workers)
    return result.best, result
