"""Geometric world model: square bounds, circular obstacles, tasks and base.

Collision queries are analytic (closest point of a segment to each disc
centre). The world boundary is treated like an obstacle edge: a point closer
than ``margin`` to the boundary is in collision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from .errors import ScenarioValidationError

DEFAULT_HALF_EXTENT = 10_000.0
DEFAULT_SAFETY_DISTANCE = 50.0


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @classmethod
    def of(cls, xy: Iterable[float]) -> "Point":
        x, y = xy
        return cls(float(x), float(y))


@dataclass(frozen=True)
class Obstacle:
    center: Point
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"obstacle radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class TaskPoint:
    id: int
    location: Point
    demand: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.demand) and self.demand >= 0):
            raise ValueError(f"task {self.id}: demand must be >= 0, got {self.demand}")


@dataclass(frozen=True)
class Environment:
    """Immutable 2D world ``[-half_extent, half_extent]^2``."""

    half_extent: float = DEFAULT_HALF_EXTENT
    obstacles: Tuple[Obstacle, ...] = ()
    tasks: Tuple[TaskPoint, ...] = ()
    base: Point = Point(0.0, 0.0)
    safety_distance: float = DEFAULT_SAFETY_DISTANCE
    _centers: np.ndarray = field(init=False, repr=False, compare=False)
    _radii: np.ndarray = field(init=False, repr=False, compare=False)
    _task_index: Dict[int, TaskPoint] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not (math.isfinite(self.half_extent) and self.half_extent > 0):
            raise ScenarioValidationError("half_extent must be > 0", field_path="world.half_extent")
        if not (math.isfinite(self.safety_distance) and self.safety_distance >= 0):
            raise ScenarioValidationError("safety_distance must be >= 0", field_path="world.safety_distance")
        centers = np.array([o.center.as_tuple() for o in self.obstacles], dtype=float).reshape(-1, 2)
        radii = np.array([o.radius for o in self.obstacles], dtype=float)
        centers.setflags(write=False)
        radii.setflags(write=False)
        object.__setattr__(self, "_centers", centers)
        object.__setattr__(self, "_radii", radii)

        if point_clearance(self, self.base) < self.safety_distance:
            raise ScenarioValidationError(
                f"base {self.base.as_tuple()} has clearance below safety distance {self.safety_distance}",
                field_path="base",
            )
        index: Dict[int, TaskPoint] = {}
        for i, t in enumerate(self.tasks):
            if t.id in index:
                raise ScenarioValidationError(f"duplicate task id {t.id}", field_path=f"tasks[{i}].id", task_id=t.id)
            clearance = point_clearance(self, t.location)
            if clearance < self.safety_distance:
                where = "inside an obstacle" if clearance < 0 and self._inside_any(t.location) else "too close to an obstacle or the boundary"
                raise ScenarioValidationError(
                    f"task {t.id} at {t.location.as_tuple()} is {where} (clearance {clearance:.3f} m < {self.safety_distance} m)",
                    field_path=f"tasks[{i}]",
                    task_id=t.id,
                )
            index[t.id] = t
        object.__setattr__(self, "_task_index", index)

    def _inside_any(self, p: Point) -> bool:
        if not len(self._radii):
            return False
        d = np.hypot(self._centers[:, 0] - p.x, self._centers[:, 1] - p.y)
        return bool(np.any(d < self._radii))

    @property
    def task_ids(self) -> Tuple[int, ...]:
        return tuple(t.id for t in self.tasks)

    @property
    def obstacle_centers(self) -> np.ndarray:
        return self._centers

    @property
    def obstacle_radii(self) -> np.ndarray:
        return self._radii

    def task(self, task_id: int) -> TaskPoint:
        try:
            return self._task_index[task_id]
        except KeyError:
            raise KeyError(f"unknown task id {task_id}") from None

    def location(self, task_id: int) -> Point:
        return self.task(task_id).location

    def contains(self, p: Point) -> bool:
        return abs(p.x) <= self.half_extent and abs(p.y) <= self.half_extent

    def without(self, indices: Iterable[int]) -> "Environment":
        """Copy of this world with the given obstacle indices removed."""
        skip = set(indices)
        if not skip:
            return self
        kept = tuple(o for i, o in enumerate(self.obstacles) if i not in skip)
        return Environment(self.half_extent, kept, self.tasks, self.base, self.safety_distance)


def straight_line_cost(a: Point, b: Point) -> float:
    return math.hypot(b.x - a.x, b.y - a.y)


def boundary_distance(env: Environment, p: Point) -> float:
    return env.half_extent - max(abs(p.x), abs(p.y))


def point_clearance(env: Environment, p: Point) -> float:
    """Signed clearance of ``p``: negative inside an obstacle or outside the world."""
    clearance = boundary_distance(env, p)
    if len(env.obstacle_radii):
        d = np.hypot(env.obstacle_centers[:, 0] - p.x, env.obstacle_centers[:, 1] - p.y) - env.obstacle_radii
        clearance = min(clearance, float(d.min()))
    return clearance


def segments_collide(env: Environment, starts: np.ndarray, ends: np.ndarray, margin: float) -> np.ndarray:
    """Vectorised :func:`segment_collides` over ``k`` segments, returns ``bool[k]``."""
    a = np.asarray(starts, dtype=float).reshape(-1, 2)
    b = np.asarray(ends, dtype=float).reshape(-1, 2)
    h = env.half_extent
    hit = (h - np.abs(a).max(axis=1) < margin) | (h - np.abs(b).max(axis=1) < margin)
    if not len(env.obstacle_radii) or not len(a):
        return hit
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    safe_dd = np.where(dd > 0.0, dd, 1.0)
    rel = env.obstacle_centers[None, :, :] - a[:, None, :]  # (k, m, 2)
    t = np.einsum("kmj,kj->km", rel, d) / safe_dd[:, None]
    t = np.where(dd[:, None] > 0.0, np.clip(t, 0.0, 1.0), 0.0)
    closest = a[:, None, :] + t[..., None] * d[:, None, :]
    gap = env.obstacle_centers[None, :, :] - closest
    dist = np.hypot(gap[..., 0], gap[..., 1])
    return hit | np.any(dist < env.obstacle_radii[None, :] + margin, axis=1)


def segment_collides(env: Environment, a: Point, b: Point, margin: float) -> bool:
    if margin < 0:
        raise ValueError("margin must be >= 0")
    return bool(segments_collide(env, a.as_array(), b.as_array(), margin)[0])


def polyline_collisions(env: Environment, points: Sequence[Point], margin: float) -> np.ndarray:
    """Indices of colliding segments along a waypoint chain."""
    if len(points) < 2:
        if points and point_clearance(env, points[0]) < margin:
            return np.array([0])
        return np.array([], dtype=int)
    arr = np.array([p.as_tuple() for p in points], dtype=float)
    return np.flatnonzero(segments_collide(env, arr[:-1], arr[1:], margin))
