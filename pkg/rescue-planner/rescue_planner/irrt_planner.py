"""Informed-RRT* point-to-point planning, path post-processing and route legs.

The tree lives in preallocated numpy arrays; nearest-neighbour search is a
linear scan. Once a first solution exists, every sample is drawn from the
informed ellipse ``|x - start| + |x - goal| <= c_best`` intersected with the
world bounds.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .determinism import derive_seed
from .env_model import Environment, Point, point_clearance, segments_collide
from .errors import LegPlanningError, NoPathFound, PreconditionError
from .fleet_model import VehicleSpec

CONVERGED_TOLERANCE = 1e-9
_MAX_BOUNDS_REJECTIONS = 1000


@dataclass(frozen=True)
class RrtParams:
    max_iterations: int = 4000
    step_size: float = 250.0
    goal_bias: float = 0.05
    rewire_gamma: Optional[float] = None  # None -> 2 x half_extent
    goal_tolerance: Optional[float] = None  # None -> step_size
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.max_iterations, int) or self.max_iterations < 1:
            raise ValueError("max_iterations must be an integer >= 1")
        if not (self.step_size > 0):
            raise ValueError("step_size must be > 0")
        if not (0 <= self.goal_bias < 1):
            raise ValueError("goal_bias must be in [0, 1)")
        if self.rewire_gamma is not None and not (self.rewire_gamma > 0):
            raise ValueError("rewire_gamma must be > 0")
        if self.goal_tolerance is not None and not (self.goal_tolerance > 0):
            raise ValueError("goal_tolerance must be > 0")

    def gamma_for(self, env: Environment) -> float:
        return float(self.rewire_gamma) if self.rewire_gamma is not None else 2.0 * env.half_extent

    @property
    def tolerance(self) -> float:
        return float(self.goal_tolerance) if self.goal_tolerance is not None else float(self.step_size)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RrtParams":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown rrt parameter(s): {', '.join(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class InformedSet:
    focus_a: Point
    focus_b: Point
    c_best: float
    c_min: float = field(default=-1.0)

    def __post_init__(self):
        c_min = math.hypot(self.focus_b.x - self.focus_a.x, self.focus_b.y - self.focus_a.y)
        object.__setattr__(self, "c_min", c_min)
        if self.c_best < c_min - CONVERGED_TOLERANCE:
            raise ValueError(f"c_best {self.c_best} is below the focal distance {c_min}")

    def contains(self, p: Point, tol: float = 1e-9) -> bool:
        d = math.hypot(p.x - self.focus_a.x, p.y - self.focus_a.y) + math.hypot(p.x - self.focus_b.x, p.y - self.focus_b.y)
        return d <= self.c_best + tol


@dataclass
class PlanStats:
    iterations: int = 0
    nodes: int = 1
    informed_samples: int = 0
    informed_violations: int = 0
    c_best_history: List[float] = field(default_factory=list)


@dataclass(frozen=True)
class PlannedPath:
    waypoints: Tuple[Point, ...]
    cost: float
    stats: Optional[PlanStats] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))

    @property
    def start(self) -> Point:
        return self.waypoints[0]

    @property
    def goal(self) -> Point:
        return self.waypoints[-1]

    def as_array(self) -> np.ndarray:
        return np.array([p.as_tuple() for p in self.waypoints], dtype=float).reshape(-1, 2)

    def to_dict(self) -> dict:
        return {"waypoints": [[p.x, p.y] for p in self.waypoints], "cost": self.cost}

    @classmethod
    def from_dict(cls, data: dict) -> "PlannedPath":
        return cls(tuple(Point.of(xy) for xy in data["waypoints"]), float(data["cost"]))

    @classmethod
    def through(cls, points: Sequence[Point], stats: Optional[PlanStats] = None) -> "PlannedPath":
        return cls(tuple(points), path_length(points), stats)


def path_length(points: Sequence[Point]) -> float:
    return float(sum(math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(points, points[1:])))


def _uniform_in_bounds(env: Environment, rng: np.random.Generator) -> np.ndarray:
    h = env.half_extent
    return rng.uniform(-h, h, size=2)


def _ellipse_point(s: InformedSet, rng: np.random.Generator) -> np.ndarray:
    a = s.focus_a.as_array()
    b = s.focus_b.as_array()
    centre = (a + b) / 2.0
    r1 = s.c_best / 2.0
    r2 = math.sqrt(max(s.c_best ** 2 - s.c_min ** 2, 0.0)) / 2.0
    theta = math.atan2(b[1] - a[1], b[0] - a[0]) if s.c_min > 0 else 0.0
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    # uniform in the unit disc, then scale and rotate onto the focal axis
    rho = math.sqrt(rng.random())
    phi = 2.0 * math.pi * rng.random()
    unit = np.array([rho * math.cos(phi), rho * math.sin(phi)])
    return centre + rot @ (np.array([r1, r2]) * unit)


def sample_informed(s: InformedSet, env: Environment, rng: np.random.Generator) -> Point:
    """Uniform sample over the informed ellipse clipped to the world bounds.

    With ``c_best = inf`` the whole world is sampled uniformly.
    """
    if not math.isfinite(s.c_best):
        return Point.of(_uniform_in_bounds(env, rng))
    h = env.half_extent
    for _ in range(_MAX_BOUNDS_REJECTIONS):
        x = _ellipse_point(s, rng)
        if abs(x[0]) <= h and abs(x[1]) <= h:
            return Point.of(x)
    # the focal midpoint always lies in both sets
    return Point((s.focus_a.x + s.focus_b.x) / 2.0, (s.focus_a.y + s.focus_b.y) / 2.0)


def _check_endpoint(env: Environment, p: Point, role: str) -> None:
    if not env.contains(p):
        raise PreconditionError(f"{role} {p.as_tuple()} lies outside the world bounds")
    clearance = point_clearance(env, p)
    if clearance < env.safety_distance:
        raise PreconditionError(
            f"{role} {p.as_tuple()} has clearance {clearance:.3f} m below safety distance {env.safety_distance} m"
        )


class _Tree:
    def __init__(self, root: np.ndarray, capacity: int):
        self.xy = np.empty((capacity, 2), dtype=float)
        self.cost = np.empty(capacity, dtype=float)
        self.parent = np.full(capacity, -1, dtype=np.int64)
        self.children: List[List[int]] = []
        self.n = 0
        self.add(root, -1, 0.0)

    def add(self, xy: np.ndarray, parent: int, cost: float) -> int:
        i = self.n
        self.xy[i] = xy
        self.cost[i] = cost
        self.parent[i] = parent
        self.children.append([])
        if parent >= 0:
            self.children[parent].append(i)
        self.n += 1
        return i

    def reparent(self, i: int, new_parent: int, new_cost: float) -> None:
        old = int(self.parent[i])
        if old >= 0:
            self.children[old].remove(i)
        self.parent[i] = new_parent
        self.children[new_parent].append(i)
        delta = self.cost[i] - new_cost
        self.cost[i] = new_cost
        stack = list(self.children[i])
        while stack:
            j = stack.pop()
            self.cost[j] -= delta
            stack.extend(self.children[j])

    def branch(self, i: int) -> List[np.ndarray]:
        out = []
        while i >= 0:
            out.append(self.xy[i].copy())
            i = int(self.parent[i])
        return out[::-1]


def plan(env: Environment, start: Point, goal: Point, params: RrtParams) -> PlannedPath:
    """Informed-RRT* from ``start`` to ``goal`` at margin ``env.safety_distance``.

    Raises PreconditionError when an endpoint lacks clearance and NoPathFound
    when ``max_iterations`` pass without reaching the goal.
    """
    _check_endpoint(env, start, "start")
    _check_endpoint(env, goal, "goal")
    stats = PlanStats()
    if start == goal:
        return PlannedPath((start,), 0.0, stats)

    margin = env.safety_distance
    a, b = start.as_array(), goal.as_array()
    c_min = float(np.hypot(*(b - a)))
    # a free straight segment is already the shortest path
    if not segments_collide(env, a, b, margin)[0]:
        stats.c_best_history.append(c_min)
        return PlannedPath((start, goal), c_min, stats)

    rng = np.random.default_rng(params.seed)
    gamma = params.gamma_for(env)
    step = params.step_size
    tolerance = params.tolerance
    tree = _Tree(a, params.max_iterations + 1)
    goal_parents: List[int] = []
    c_best = math.inf

    for it in range(1, params.max_iterations + 1):
        stats.iterations = it
        if math.isfinite(c_best):
            informed = InformedSet(start, goal, c_best)
            q = sample_informed(informed, env, rng)
            stats.informed_samples += 1
            if not informed.contains(q):
                stats.informed_violations += 1
            x = q.as_array()
        elif rng.random() < params.goal_bias:
            x = b.copy()
        else:
            x = _uniform_in_bounds(env, rng)

        n = tree.n
        pts = tree.xy[:n]
        d2 = np.einsum("ij,ij->i", pts - x, pts - x)
        nearest = int(np.argmin(d2))
        dist = math.sqrt(float(d2[nearest]))
        if dist == 0.0:
            continue
        new = x if dist <= step else pts[nearest] + (x - pts[nearest]) * (step / dist)
        if segments_collide(env, pts[nearest], new, margin)[0]:
            continue

        radius = min(gamma * math.sqrt(math.log(n) / n), 4.0 * step) if n > 1 else 0.0
        dn = np.hypot(pts[:, 0] - new[0], pts[:, 1] - new[1])
        near = np.flatnonzero(dn <= radius)
        if nearest not in near:
            near = np.append(near, nearest)
        free = ~segments_collide(env, pts[near], np.broadcast_to(new, (len(near), 2)), margin)
        near, dn_near = near[free], dn[near[free]]
        via = tree.cost[near] + dn_near
        best = int(np.argmin(via))
        k = tree.add(new, int(near[best]), float(via[best]))

        # rewire neighbours through the new node
        through = tree.cost[k] + dn_near
        better = np.flatnonzero(through < tree.cost[near] - 1e-12)
        for idx in better:
            j = int(near[idx])
            if j != tree.parent[k] and tree.cost[k] + dn_near[idx] < tree.cost[j]:
                tree.reparent(j, k, float(tree.cost[k] + dn_near[idx]))

        d_goal = float(np.hypot(*(b - new)))
        if d_goal <= tolerance and not segments_collide(env, new, b, margin)[0]:
            goal_parents.append(k)
        if goal_parents:
            gp = np.asarray(goal_parents)
            totals = tree.cost[gp] + np.hypot(b[0] - tree.xy[gp, 0], b[1] - tree.xy[gp, 1])
            c_best = min(c_best, float(totals.min()))
            stats.c_best_history.append(c_best)
            if c_best <= c_min * (1.0 + CONVERGED_TOLERANCE):
                break

    stats.nodes = tree.n
    if not goal_parents:
        raise NoPathFound(
            f"no path from {start.as_tuple()} to {goal.as_tuple()} after {stats.iterations} iterations",
            iterations=stats.iterations,
        )
    gp = np.asarray(goal_parents)
    totals = tree.cost[gp] + np.hypot(b[0] - tree.xy[gp, 0], b[1] - tree.xy[gp, 1])
    best_parent = int(gp[int(np.argmin(totals))])
    chain = [Point.of(xy) for xy in tree.branch(best_parent)]
    chain[0] = start
    chain.append(goal)
    return PlannedPath.through(chain, stats)


def prune_and_smooth(env: Environment, path: PlannedPath) -> PlannedPath:
    """Greedy shortcutting followed by conservative quarter-point corner cuts."""
    pts = list(path.waypoints)
    if len(pts) <= 2:
        return PlannedPath.through(pts, path.stats)
    margin = env.safety_distance
    arr = np.array([p.as_tuple() for p in pts], dtype=float)

    kept = [0]
    i = 0
    last = len(pts) - 1
    while i < last:
        ahead = np.arange(i + 1, last + 1)
        free = ~segments_collide(env, np.broadcast_to(arr[i], (len(ahead), 2)), arr[ahead], margin)
        reachable = ahead[free]
        j = int(reachable.max()) if len(reachable) else i + 1
        kept.append(j)
        i = j
    shortcut = [pts[k] for k in kept]

    out = [shortcut[0]]
    for idx in range(1, len(shortcut) - 1):
        prev_pt, corner, nxt = out[-1], shortcut[idx], shortcut[idx + 1]
        p = Point(corner.x + 0.25 * (shortcut[idx - 1].x - corner.x), corner.y + 0.25 * (shortcut[idx - 1].y - corner.y))
        q = Point(corner.x + 0.25 * (nxt.x - corner.x), corner.y + 0.25 * (nxt.y - corner.y))
        starts = np.array([prev_pt.as_tuple(), p.as_tuple(), q.as_tuple()])
        ends = np.array([p.as_tuple(), q.as_tuple(), nxt.as_tuple()])
        if not segments_collide(env, starts, ends, margin).any() and (
            path_length([prev_pt, p, q, nxt]) <= path_length([prev_pt, corner, nxt])
        ):
            out.extend([p, q])
        else:
            out.append(corner)
    out.append(shortcut[-1])
    return PlannedPath.through(out, path.stats)


def leg_seed(seed: int, vehicle_id: int, leg_index: int) -> int:
    return derive_seed(seed, vehicle_id, leg_index)


def plan_route(env: Environment, spec: VehicleSpec, route: Sequence[int], params: RrtParams, *, smooth: bool = False) -> List[PlannedPath]:
    """Plan base -> t1 -> ... -> tn -> base as independent legs.

    Obstacles in ``spec.ignored_obstacles`` are dropped for this vehicle.
    """
    world = env.without(spec.ignored_obstacles)
    stops = [env.base] + [env.location(t) for t in route] + [env.base]
    if not route:
        stops = [env.base, env.base]
    legs: List[PlannedPath] = []
    for k, (origin, target) in enumerate(zip(stops, stops[1:])):
        try:
            leg = plan(world, origin, target, replace(params, seed=leg_seed(params.seed, spec.id, k)))
        except NoPathFound as e:
            raise LegPlanningError(spec.id, k, _stop_label(route, k), _stop_label(route, k + 1), e) from e
        legs.append(prune_and_smooth(world, leg) if smooth else leg)
    return legs


def _stop_label(route: Sequence[int], position: int) -> str:
    if position == 0 or position == len(route) + 1:
        return "base"
    return f"task {route[position - 1]}"


def route_cost(legs: Sequence[PlannedPath]) -> float:
    return float(sum(leg.cost for leg in legs))
