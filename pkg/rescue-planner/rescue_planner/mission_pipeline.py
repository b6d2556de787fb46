"""Allocate -> sequence -> plan workflow, mission metrics and plan validation.

Mission time assumes constant maximum speed with zero service time at tasks,
so ``time_i = L_i / v_i``; energy is ``eta_i * L_i``.
"""
from __future__ import annotations

import logging
import math
import statistics
import time
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .baselines import BaselineKind, allocate
from .cmaes_seq import CmaesParams, improvement_report, optimize_sequence, table_cost_fn, tour_cost
from .determinism import derive_seed
from .ega_alloc import Assignment, EgaParams
from .env_model import Environment, Point, polyline_collisions
from .errors import LegPlanningError, NoPathFound, PipelineError, PlannerError, PreconditionError
from .fleet_model import FeasibilityReport, Fleet, VehicleKind, VehicleSpec, Violation, route_feasible
from .irrt_planner import PlannedPath, RrtParams, path_length, plan, plan_route, prune_and_smooth
from .runtime import map_ordered

logger = logging.getLogger(__name__)

SEQUENCE_COSTS = ("euclidean", "planned")
SEPARATION_STEP_S = 1.0
REL_TOL = 1e-9
_CONFIG_SECTIONS = ("ega", "rrt", "cmaes", "pipeline")


@dataclass(frozen=True)
class PipelineConfig:
    ega: EgaParams = field(default_factory=EgaParams)
    rrt: RrtParams = field(default_factory=RrtParams)
    cmaes: CmaesParams = field(default_factory=CmaesParams)
    allocator: BaselineKind = BaselineKind.EGA
    enable_cmaes: bool = True
    seed: int = 0
    sequence_cost: str = "euclidean"
    planned_cost_max_tasks: int = 4
    workers: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "allocator", BaselineKind.parse(str(getattr(self.allocator, "value", self.allocator))))
        if self.sequence_cost not in SEQUENCE_COSTS:
            raise ValueError(f"sequence_cost must be one of {SEQUENCE_COSTS}, got {self.sequence_cost!r}")
        if not isinstance(self.planned_cost_max_tasks, int) or self.planned_cost_max_tasks < 0:
            raise ValueError("planned_cost_max_tasks must be an integer >= 0")
        if self.workers is not None and self.workers < 1:
            raise ValueError("workers must be >= 1")

    def staged(self) -> "PipelineConfig":
        """Copy whose stage seeds are derived from the root seed."""
        return replace(
            self,
            ega=replace(self.ega, seed=derive_seed(self.seed, "ega")),
            rrt=replace(self.rrt, seed=derive_seed(self.seed, "rrt")),
            cmaes=replace(self.cmaes, seed=derive_seed(self.seed, "cmaes")),
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "allocator": self.allocator.value,
            "enable_cmaes": self.enable_cmaes,
            "sequence_cost": self.sequence_cost,
            "planned_cost_max_tasks": self.planned_cost_max_tasks,
            "ega": self.ega.to_dict(),
            "rrt": self.rrt.to_dict(),
            "cmaes": self.cmaes.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PipelineConfig":
        data = dict(data)
        nested = {
            "ega": EgaParams.from_dict(data.pop("ega", {})),
            "rrt": RrtParams.from_dict(data.pop("rrt", {})),
            "cmaes": CmaesParams.from_dict(data.pop("cmaes", {})),
        }
        known = {f.name for f in fields(cls)} - set(nested)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown pipeline parameter(s): {', '.join(unknown)}")
        return cls(**nested, **data)

    @classmethod
    def resolve(cls, *layers: Optional[Mapping]) -> "PipelineConfig":
        """Merge override layers (lowest first) shaped like
        ``{"ega": {...}, "rrt": {...}, "cmaes": {...}, "pipeline": {...}}``."""
        merged: Dict[str, dict] = {s: {} for s in _CONFIG_SECTIONS}
        for layer in layers:
            if not layer:
                continue
            for section, values in layer.items():
                if section not in merged:
                    raise ValueError(f"unknown config section {section!r}")
                merged[section].update({k: v for k, v in (values or {}).items() if v is not None})
        top = merged.pop("pipeline")
        return cls.from_dict({**top, **merged})


@dataclass(frozen=True)
class VehiclePlan:
    vehicle_id: int
    kind: VehicleKind
    route: Tuple[int, ...]
    legs: Tuple[PlannedPath, ...]
    route_cost: float
    mission_time: float
    energy: float
    feasibility: FeasibilityReport

    def waypoints(self) -> List[Point]:
        pts: List[Point] = []
        for leg in self.legs:
            pts.extend(leg.waypoints if not pts else leg.waypoints[1:])
        return pts

    def to_dict(self) -> dict:
        return {
            "vehicle_id": self.vehicle_id,
            "kind": self.kind.value,
            "route": list(self.route),
            "legs": [leg.to_dict() for leg in self.legs],
            "route_cost_m": self.route_cost,
            "mission_time_s": self.mission_time,
            "energy_j": self.energy,
            "feasibility": self.feasibility.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VehiclePlan":
        vid = int(data["vehicle_id"])
        violations = tuple(
            Violation(v["constraint"], float(v["limit"]), float(v["actual"])) for v in data["feasibility"]["violations"]
        )
        return cls(
            vehicle_id=vid,
            kind=VehicleKind(data["kind"]),
            route=tuple(int(t) for t in data["route"]),
            legs=tuple(PlannedPath.from_dict(leg) for leg in data["legs"]),
            route_cost=float(data["route_cost_m"]),
            mission_time=float(data["mission_time_s"]),
            energy=float(data["energy_j"]),
            feasibility=FeasibilityReport(vid, violations),
        )


@dataclass
class MissionPlan:
    vehicles: Tuple[VehiclePlan, ...]
    makespan: float
    total_length: float
    total_energy: float
    min_vehicle_separation: Optional[float] = None
    allocator: str = BaselineKind.EGA.value
    improvement: Optional[dict] = None
    ega_history: List[Tuple[int, float]] = field(default_factory=list)
    cmaes_history: Dict[int, List[Tuple[int, float]]] = field(default_factory=dict)
    cmaes_metadata: Dict[int, dict] = field(default_factory=dict)
    ega_feasible: Optional[bool] = None
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return all(v.feasibility.feasible for v in self.vehicles)

    def vehicle(self, vehicle_id: int) -> VehiclePlan:
        for v in self.vehicles:
            if v.vehicle_id == vehicle_id:
                return v
        raise KeyError(f"no plan for vehicle {vehicle_id}")

    def assignment(self) -> Assignment:
        return Assignment({v.vehicle_id: v.route for v in self.vehicles})

    def summary(self) -> dict:
        return {
            "makespan_min": self.makespan / 60.0,
            "total_length_km": self.total_length / 1000.0,
            "total_energy_j": self.total_energy,
            "feasible": self.feasible,
        }

    def to_dict(self, *, include_timings: bool = False) -> dict:
        d = {
            "allocator": self.allocator,
            "vehicles": [v.to_dict() for v in self.vehicles],
            "makespan_s": self.makespan,
            "total_length_m": self.total_length,
            "total_energy_j": self.total_energy,
            "min_vehicle_separation_m": self.min_vehicle_separation,
            "feasible": self.feasible,
            "ega_feasible": self.ega_feasible,
            "improvement": self.improvement,
            "histories": {
                "ega": [[g, c] for g, c in self.ega_history],
                "cmaes": {str(v): [[g, c] for g, c in h] for v, h in sorted(self.cmaes_history.items())},
            },
            "cmaes_metadata": {str(v): m for v, m in sorted(self.cmaes_metadata.items())},
        }
        if include_timings:
            d["timings_s"] = dict(self.timings)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "MissionPlan":
        hist = data.get("histories") or {}
        return cls(
            vehicles=tuple(VehiclePlan.from_dict(v) for v in data["vehicles"]),
            makespan=float(data["makespan_s"]),
            total_length=float(data["total_length_m"]),
            total_energy=float(data["total_energy_j"]),
            min_vehicle_separation=data.get("min_vehicle_separation_m"),
            allocator=data.get("allocator", BaselineKind.EGA.value),
            improvement=data.get("improvement"),
            ega_history=[(int(g), float(c)) for g, c in hist.get("ega", [])],
            cmaes_history={int(v): [(int(g), float(c)) for g, c in h] for v, h in (hist.get("cmaes") or {}).items()},
            cmaes_metadata={int(v): m for v, m in (data.get("cmaes_metadata") or {}).items()},
            ega_feasible=data.get("ega_feasible"),
            timings=dict(data.get("timings_s") or {}),
        )


def _planned_table(world: Environment, points: Sequence[Point], rrt: RrtParams, vehicle_id: int) -> np.ndarray:
    """Symmetric obstacle-aware cost table over ``points`` (last entry is the base)."""
    n = len(points)
    table = np.zeros((n, n))
    fallback = 10.0 * 2.0 * math.sqrt(2.0) * world.half_extent
    for i in range(n):
        for j in range(i + 1, n):
            params = replace(rrt, seed=derive_seed(rrt.seed, "sequence", vehicle_id, i, j))
            try:
                c = prune_and_smooth(world, plan(world, points[i], points[j], params)).cost
            except NoPathFound:
                c = math.hypot(points[j].x - points[i].x, points[j].y - points[i].y) + fallback
            table[i, j] = table[j, i] = c
    return table


def _sequence(env: Environment, spec: VehicleSpec, route: Tuple[int, ...], cfg: PipelineConfig):
    if len(route) < 2:
        return route, None
    locations = [env.location(t) for t in route]
    cost_fn = None
    if cfg.sequence_cost == "planned" and len(route) <= cfg.planned_cost_max_tasks:
        world = env.without(spec.ignored_obstacles)
        cost_fn = table_cost_fn(_planned_table(world, locations + [env.base], cfg.rrt, spec.id))
    params = replace(cfg.cmaes, seed=derive_seed(cfg.cmaes.seed, spec.id))
    result = optimize_sequence(locations, env.base, params, cost_fn=cost_fn)
    return tuple(route[i] for i in result.order), result


def _route_demand(env: Environment, route: Iterable[int]) -> float:
    return float(sum(env.task(t).demand for t in route))


def _vehicle_plan(env: Environment, spec: VehicleSpec, route: Tuple[int, ...], legs: Sequence[PlannedPath]) -> VehiclePlan:
    length = float(sum(leg.cost for leg in legs))
    return VehiclePlan(
        vehicle_id=spec.id,
        kind=spec.kind,
        route=route,
        legs=tuple(legs),
        route_cost=length,
        mission_time=length / spec.max_speed,
        energy=spec.energy_rate * length,
        feasibility=route_feasible(spec, length, _route_demand(env, route)),
    )


def _trajectory_samples(vp: VehiclePlan, spec: VehicleSpec, times: np.ndarray) -> np.ndarray:
    pts = np.array([p.as_tuple() for p in vp.waypoints()], dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        return np.repeat(pts[:1], len(times), axis=0)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.minimum(times * spec.max_speed, arc[-1])
    return np.column_stack([np.interp(s, arc, pts[:, 0]), np.interp(s, arc, pts[:, 1])])


def min_vehicle_separation(env: Environment, fleet: Fleet, vehicles: Sequence[VehiclePlan], step: float = SEPARATION_STEP_S) -> Optional[float]:
    """Smallest distance between two vehicles sampled every ``step`` seconds.

    Samples where either vehicle is within the safety distance of the base, or
    already home, are ignored. None when no two vehicles are ever out together.
    """
    active = [vp for vp in vehicles if vp.route]
    if len(active) < 2:
        return None
    horizon = max(vp.mission_time for vp in active)
    times = np.arange(0.0, horizon + step, step)
    base = env.base.as_array()
    tracks, live = [], []
    for vp in active:
        xy = _trajectory_samples(vp, fleet.vehicle(vp.vehicle_id), times)
        tracks.append(xy)
        away = np.hypot(*(xy - base).T) >= env.safety_distance
        live.append(away & (times < vp.mission_time))
    best: Optional[float] = None
    for i in range(len(active)):
        for j in range(i + 1, len(active)):
            both = live[i] & live[j]
            if not both.any():
                continue
            d = float(np.hypot(*(tracks[i][both] - tracks[j][both]).T).min())
            best = d if best is None else min(best, d)
    return best


def run_pipeline(env: Environment, fleet: Fleet, config: PipelineConfig) -> MissionPlan:
    """Allocate tasks, optionally refine each visiting order, then plan and
    smooth every leg and compute mission metrics."""
    cfg = config.staged()
    arm = cfg.allocator.value
    logger.info("run_pipeline config=%s tasks=%d vehicles=%d", cfg.to_dict(), len(env.tasks), len(fleet))
    timings: Dict[str, float] = {}

    t0 = time.perf_counter()
    try:
        assignment, ega_result = allocate(cfg.allocator, env, fleet, cfg.ega, workers=cfg.workers)
    except PlannerError as e:
        raise PipelineError(f"allocation failed: {e.reason}", arm=arm) from e
    if not assignment.is_partition(env.task_ids):
        raise PipelineError("allocation is not a partition of the task set", arm=arm)
    timings["allocate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    routes = {v.id: assignment.route(v.id) for v in fleet.vehicles}
    cmaes_history: Dict[int, List[Tuple[int, float]]] = {}
    cmaes_metadata: Dict[int, dict] = {}
    improvement = None
    if cfg.enable_cmaes:
        before = sum(tour_cost(range(len(r)), [env.location(t) for t in r], env.base) for r in routes.values())
        results = map_ordered(lambda v: _sequence(env, v, routes[v.id], cfg), fleet.vehicles, workers=cfg.workers)
        for spec, (order, result) in zip(fleet.vehicles, results):
            routes[spec.id] = order
            if result is not None:
                cmaes_history[spec.id] = result.history
                cmaes_metadata[spec.id] = result.metadata
        after = sum(tour_cost(range(len(r)), [env.location(t) for t in r], env.base) for r in routes.values())
        improvement = {
            "straight_line_before_m": before,
            "straight_line_after_m": after,
            "fraction": improvement_report(before, after) if before > 0 else 0.0,
        }
    timings["sequence"] = time.perf_counter() - t0

    t0 = time.perf_counter()

    def plan_vehicle(spec: VehicleSpec) -> VehiclePlan:
        legs = plan_route(env, spec, routes[spec.id], cfg.rrt, smooth=True)
        return _vehicle_plan(env, spec, routes[spec.id], legs)

    try:
        vehicles = tuple(map_ordered(plan_vehicle, fleet.vehicles, workers=cfg.workers))
    except LegPlanningError as e:
        raise PipelineError(e.reason, arm=arm, vehicle_id=e.vehicle_id, leg_index=e.leg_index) from e
    timings["plan"] = time.perf_counter() - t0

    plan_ = MissionPlan(
        vehicles=vehicles,
        makespan=max((v.mission_time for v in vehicles), default=0.0),
        total_length=float(sum(v.route_cost for v in vehicles)),
        total_energy=float(sum(v.energy for v in vehicles)),
        min_vehicle_separation=min_vehicle_separation(env, fleet, vehicles),
        allocator=arm,
        improvement=improvement,
        ega_history=list(ega_result.history) if ega_result else [],
        cmaes_history=cmaes_history,
        cmaes_metadata=cmaes_metadata,
        ega_feasible=ega_result.feasible if ega_result else None,
        timings=timings,
    )
    for v in vehicles:
        if not v.feasibility.feasible:
            logger.warning("vehicle %d route is infeasible: %s", v.vehicle_id, v.feasibility.to_dict()["violations"])
    return plan_


@dataclass(frozen=True)
class PlanViolation:
    kind: str  # partition | collision | continuity | range | energy | payload | metric
    detail: str
    vehicle_id: Optional[int] = None
    leg_index: Optional[int] = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "detail": self.detail, "vehicle_id": self.vehicle_id, "leg_index": self.leg_index}


@dataclass
class ValidationReport:
    violations: List[PlanViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def of_kind(self, kind: str) -> List[PlanViolation]:
        return [v for v in self.violations if v.kind == kind]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=REL_TOL, abs_tol=REL_TOL)


def _same_point(a: Point, b: Point) -> bool:
    return math.hypot(a.x - b.x, a.y - b.y) <= 1e-6


def validate_plan(env: Environment, fleet: Fleet, plan: MissionPlan) -> ValidationReport:
    """Re-check a plan from its legs alone; never raises for a bad plan."""
    report = ValidationReport()
    add = report.violations.append

    seen: Dict[int, int] = {}
    planned_ids = [vp.vehicle_id for vp in plan.vehicles]
    for vid in fleet.ids:
        if vid not in planned_ids:
            add(PlanViolation("partition", f"vehicle {vid} missing from plan", vid))
    for vp in plan.vehicles:
        if vp.vehicle_id not in fleet.ids:
            add(PlanViolation("partition", f"plan names unknown vehicle {vp.vehicle_id}", vp.vehicle_id))
        for t in vp.route:
            if t in seen:
                add(PlanViolation("partition", f"task {t} assigned to vehicles {seen[t]} and {vp.vehicle_id}", vp.vehicle_id))
            seen.setdefault(t, vp.vehicle_id)
    for t in env.task_ids:
        if t not in seen:
            add(PlanViolation("partition", f"task {t} is not assigned"))
    known_tasks = set(env.task_ids)
    for t in seen:
        if t not in known_tasks:
            add(PlanViolation("partition", f"task {t} does not exist", seen[t]))

    total = 0.0
    energy = 0.0
    makespan = 0.0
    for vp in plan.vehicles:
        if vp.vehicle_id not in fleet.ids:
            continue
        spec = fleet.vehicle(vp.vehicle_id)
        world = env.without(spec.ignored_obstacles)
        valid_route = all(t in known_tasks for t in vp.route)
        stops = [env.base] + ([env.location(t) for t in vp.route] if valid_route else []) + [env.base]
        expected_legs = max(1, len(vp.route) + 1)
        if len(vp.legs) != expected_legs:
            add(PlanViolation("continuity", f"expected {expected_legs} legs, found {len(vp.legs)}", vp.vehicle_id))
        length = 0.0
        for k, leg in enumerate(vp.legs):
            if not leg.waypoints:
                add(PlanViolation("continuity", "leg has no waypoints", vp.vehicle_id, k))
                continue
            if valid_route and k + 1 < len(stops) and not (
                _same_point(leg.start, stops[k]) and _same_point(leg.goal, stops[k + 1])
            ):
                add(PlanViolation("continuity", f"leg does not join {stops[k].as_tuple()} to {stops[k + 1].as_tuple()}", vp.vehicle_id, k))
            if len(polyline_collisions(world, list(leg.waypoints), env.safety_distance)):
                add(PlanViolation("collision", "leg violates the safety distance", vp.vehicle_id, k))
            recomputed = path_length(leg.waypoints)
            if not _close(recomputed, leg.cost):
                add(PlanViolation("metric", f"leg cost {leg.cost} != segment sum {recomputed}", vp.vehicle_id, k))
            length += recomputed
        if not _close(length, vp.route_cost):
            add(PlanViolation("metric", f"route cost {vp.route_cost} != leg sum {length}", vp.vehicle_id))
        if not _close(vp.route_cost / spec.max_speed, vp.mission_time):
            add(PlanViolation("metric", "mission time != route cost / speed", vp.vehicle_id))
        if not _close(spec.energy_rate * vp.route_cost, vp.energy):
            add(PlanViolation("metric", "energy != rate x route cost", vp.vehicle_id))
        demand = _route_demand(env, [t for t in vp.route if t in known_tasks])
        for violation in route_feasible(spec, length, demand).violations:
            add(PlanViolation(violation.constraint, f"{violation.constraint} exceeded by {violation.magnitude:.3f}", vp.vehicle_id))
        total += vp.route_cost
        energy += vp.energy
        makespan = max(makespan, vp.mission_time)

    if not _close(total, plan.total_length):
        add(PlanViolation("metric", f"total length {plan.total_length} != sum of routes {total}"))
    if not _close(energy, plan.total_energy):
        add(PlanViolation("metric", f"total energy {plan.total_energy} != sum of vehicles {energy}"))
    if not _close(makespan, plan.makespan):
        add(PlanViolation("metric", f"makespan {plan.makespan} != slowest vehicle {makespan}"))
    return report


@dataclass(frozen=True)
class ComparisonRow:
    arm: str
    seed: int
    status: str
    makespan_min: Optional[float] = None
    total_length_km: Optional[float] = None
    total_energy_j: Optional[float] = None
    feasible: Optional[bool] = None
    runtime_s: Optional[float] = None
    error: Optional[str] = None


@dataclass
class ComparisonTable:
    rows: List[ComparisonRow] = field(default_factory=list)

    def arms(self) -> List[str]:
        out: List[str] = []
        for r in self.rows:
            if r.arm not in out:
                out.append(r.arm)
        return out

    def medians(self) -> List[ComparisonRow]:
        """Median makespan, length and energy per arm over successful rows."""
        out = []
        for arm in self.arms():
            ok = [r for r in self.rows if r.arm == arm and r.status == "ok"]
            if not ok:
                out.append(ComparisonRow(arm, -1, "median"))
                continue
            runtimes = [r.runtime_s for r in ok if r.runtime_s is not None]
            out.append(
                ComparisonRow(
                    arm=arm,
                    seed=-1,
                    status="median",
                    makespan_min=statistics.median(r.makespan_min for r in ok),
                    total_length_km=statistics.median(r.total_length_km for r in ok),
                    total_energy_j=statistics.median(r.total_energy_j for r in ok),
                    feasible=all(r.feasible for r in ok),
                    runtime_s=statistics.median(runtimes) if runtimes else None,
                )
            )
        return out


def compare_allocators(
    env: Environment,
    fleet: Fleet,
    config: PipelineConfig,
    arms: Sequence[BaselineKind],
    *,
    seeds: Optional[Sequence[int]] = None,
    with_runtime: bool = False,
    workers: Optional[int] = None,
) -> ComparisonTable:
    """Run every arm under every seed on the same scenario; one row each.

    A failing arm becomes an error row and the others still run.
    """
    if len(arms) < 2:
        raise PreconditionError("compare_allocators needs at least two arms")
    jobs = [(BaselineKind(a), s) for s in (seeds if seeds is not None else [config.seed]) for a in arms]

    def run(job: Tuple[BaselineKind, int]) -> ComparisonRow:
        arm, seed = job
        t0 = time.perf_counter()
        try:
            result = run_pipeline(env, fleet, replace(config, allocator=arm, seed=seed, workers=1))
        except PlannerError as e:
            logger.warning("arm %s seed %d failed: %s", arm.value, seed, e)
            return ComparisonRow(arm.value, seed, "error", error=f"{e.code}: {e.reason}")
        return ComparisonRow(
            arm=arm.value,
            seed=seed,
            status="ok",
            makespan_min=result.makespan / 60.0,
            total_length_km=result.total_length / 1000.0,
            total_energy_j=result.total_energy,
            feasible=result.feasible,
            runtime_s=(time.perf_counter() - t0) if with_runtime else None,
        )

    return ComparisonTable(map_ordered(run, jobs, workers=workers))
