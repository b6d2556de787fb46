"""Scenario and result documents: generation, schema validation, persistence
and CSV export.

Documents are JSON with a fixed field order; coordinates are stored to 1e-3 m
so a load/save cycle reproduces the file byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import jsonschema
import numpy as np

from .determinism import id_for, rng_for
from .env_model import DEFAULT_HALF_EXTENT, DEFAULT_SAFETY_DISTANCE, Environment, Obstacle, Point, TaskPoint
from .errors import PlacementError, ScenarioValidationError
from .fleet_model import Fleet, VehicleSpec, default_fleet, make_vehicle
from .mission_pipeline import ComparisonRow, ComparisonTable, MissionPlan, PipelineConfig, ValidationReport

logger = logging.getLogger(__name__)

SCHEMA_DIR = Path(__file__).resolve().parent / "schemas"
SCENARIO_SCHEMA = json.loads((SCHEMA_DIR / "scenario.json").read_text())
RESULT_SCHEMA = json.loads((SCHEMA_DIR / "result.json").read_text())

SCENARIO_VERSION = "rescue-scenario-v1"
RESULT_VERSION = "rescue-result-v1"
COORD_DECIMALS = 3
RATE_DECIMALS = 6
OBSTACLE_RADIUS_RANGE = (250.0, 750.0)
MAX_PLACEMENT_ATTEMPTS = 100_000
REACH_FRACTION = 0.45
LAYOUTS = ("uniform", "clustered")

_KNOWN_FIELDS = {
    "": {"schema_version", "world", "base", "obstacles", "tasks", "fleet", "defaults", "generator"},
    "world": {"half_extent", "safety_distance"},
    "base": {"x", "y"},
    "obstacles": {"cx", "cy", "r"},
    "tasks": {"id", "x", "y", "demand"},
    "fleet": {"id", "kind", "max_speed", "max_range", "payload_capacity", "energy_rate", "energy_budget_cost", "ignored_obstacles"},
}

PathLike = Union[str, Path]


def _c(v: float) -> float:
    return round(float(v), COORD_DECIMALS) + 0.0


def _r(v: float) -> float:
    return round(float(v), RATE_DECIMALS) + 0.0


def vehicle_record(v: VehicleSpec) -> dict:
    return {
        "id": v.id,
        "kind": v.kind.value,
        "max_speed": _r(v.max_speed),
        "max_range": _c(v.max_range),
        "payload_capacity": _c(v.payload_capacity),
        "energy_rate": _r(v.energy_rate),
        "energy_budget_cost": _c(v.energy_budget_cost),
        "ignored_obstacles": sorted(v.ignored_obstacles),
    }


def scenario_document(env: Environment, fleet: Fleet, *, defaults: Optional[dict] = None, generator: Optional[dict] = None) -> dict:
    """Canonical document for ``env`` and ``fleet``."""
    doc = {
        "schema_version": SCENARIO_VERSION,
        "world": {"half_extent": _c(env.half_extent), "safety_distance": _c(env.safety_distance)},
        "base": {"x": _c(env.base.x), "y": _c(env.base.y)},
        "obstacles": [{"cx": _c(o.center.x), "cy": _c(o.center.y), "r": _c(o.radius)} for o in env.obstacles],
        "tasks": [{"id": t.id, "x": _c(t.location.x), "y": _c(t.location.y), "demand": _c(t.demand)} for t in env.tasks],
        "fleet": [vehicle_record(v) for v in fleet.vehicles],
    }
    if defaults:
        doc["defaults"] = defaults
    if generator:
        doc["generator"] = generator
    return doc


def _field_path(parts: Iterable) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _warn_unknown(doc: dict) -> List[str]:
    notes = []
    for key in sorted(set(doc) - _KNOWN_FIELDS[""]):
        notes.append(key)
    for section in ("world", "base"):
        for key in sorted(set(doc.get(section) or {}) - _KNOWN_FIELDS[section]):
            notes.append(f"{section}.{key}")
    for section in ("obstacles", "tasks", "fleet"):
        for i, item in enumerate(doc.get(section) or []):
            for key in sorted(set(item) - _KNOWN_FIELDS[section]):
                notes.append(f"{section}[{i}].{key}")
    for note in notes:
        logger.warning("ignoring unknown scenario field %s", note)
    return notes


def validate_scenario_document(doc: dict) -> List[str]:
    """Schema check; returns unknown-field paths (warnings, not errors)."""
    if not isinstance(doc, dict):
        raise ScenarioValidationError("scenario must be a JSON object")
    errors = sorted(jsonschema.Draft7Validator(SCENARIO_SCHEMA).iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise ScenarioValidationError(e.message, field_path=_field_path(e.absolute_path))
    return _warn_unknown(doc)


@dataclass
class ScenarioFile:
    document: dict
    env: Environment
    fleet: Fleet
    warnings: List[str] = field(default_factory=list)

    @property
    def defaults(self) -> dict:
        return self.document.get("defaults") or {}

    @property
    def digest(self) -> str:
        return id_for(self.document)


def parse_scenario(doc: dict) -> ScenarioFile:
    warnings = validate_scenario_document(doc)
    world = doc["world"]
    obstacles = []
    for i, o in enumerate(doc["obstacles"]):
        try:
            obstacles.append(Obstacle(Point(o["cx"], o["cy"]), float(o["r"])))
        except ValueError as e:
            raise ScenarioValidationError(str(e), field_path=f"obstacles[{i}]") from e
    obstacles = tuple(obstacles)
    tasks = []
    for i, t in enumerate(doc["tasks"]):
        try:
            tasks.append(TaskPoint(int(t["id"]), Point(t["x"], t["y"]), float(t.get("demand", 0.0))))
        except ValueError as e:
            raise ScenarioValidationError(str(e), field_path=f"tasks[{i}]", task_id=t.get("id")) from e
    try:
        base = Point(doc["base"]["x"], doc["base"]["y"])
    except ValueError as e:
        raise ScenarioValidationError(str(e), field_path="base") from e
    env = Environment(
        half_extent=float(world["half_extent"]),
        obstacles=obstacles,
        tasks=tuple(tasks),
        base=base,
        safety_distance=float(world.get("safety_distance", DEFAULT_SAFETY_DISTANCE)),
    )
    for i, t in enumerate(env.tasks):
        if not env.contains(t.location):
            raise ScenarioValidationError(f"task {t.id} lies outside the world", field_path=f"tasks[{i}]", task_id=t.id)
    vehicles = []
    for i, rec in enumerate(doc["fleet"]):
        try:
            vehicles.append(_vehicle_from_record(rec))
        except ValueError as e:
            raise ScenarioValidationError(str(e), field_path=f"fleet[{i}]") from e
        bad = [k for k in vehicles[-1].ignored_obstacles if k >= len(obstacles)]
        if bad:
            raise ScenarioValidationError(f"ignored obstacle index {bad[0]} out of range", field_path=f"fleet[{i}].ignored_obstacles")
    try:
        fleet = Fleet(tuple(vehicles))
    except ValueError as e:
        raise ScenarioValidationError(str(e), field_path="fleet") from e
    defaults = doc.get("defaults")
    if defaults:
        try:
            PipelineConfig.resolve(defaults)
        except (TypeError, ValueError) as e:
            raise ScenarioValidationError(str(e), field_path="defaults") from e
    return ScenarioFile(doc, env, fleet, warnings)


def _vehicle_from_record(rec: dict) -> VehicleSpec:
    overrides = {k: rec[k] for k in ("max_speed", "max_range", "payload_capacity", "energy_rate", "energy_budget_cost") if k in rec}
    overrides["ignored_obstacles"] = frozenset(rec.get("ignored_obstacles", ()))
    return make_vehicle(int(rec["id"]), rec["kind"], **overrides)


def _read_json(path: PathLike) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioValidationError(f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from e


def read_scenario(path: PathLike) -> ScenarioFile:
    return parse_scenario(_read_json(path))


def load_scenario(path: PathLike) -> Tuple[Environment, Fleet]:
    sf = read_scenario(path)
    return sf.env, sf.fleet


def dumps_document(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def atomic_write_text(path: PathLike, text: str) -> None:
    target = Path(path)
    if target.parent and not target.parent.exists():
        target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=str(target.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_scenario(path: PathLike, doc: dict) -> None:
    validate_scenario_document(doc)
    atomic_write_text(path, dumps_document(doc))


def _fleet_from_spec(fleet_spec: Union[Fleet, Tuple[int, int]]) -> Fleet:
    if isinstance(fleet_spec, Fleet):
        return fleet_spec
    n_uav, n_ugv = fleet_spec
    return default_fleet(int(n_uav), int(n_ugv))


def generate_scenario(
    n_tasks: int,
    n_obstacles: int,
    fleet_spec: Union[Fleet, Tuple[int, int]],
    seed: int,
    *,
    layout: str = "uniform",
    n_clusters: int = 3,
    cluster_spread: float = 1500.0,
    max_demand: float = 0.0,
    safety_distance: float = DEFAULT_SAFETY_DISTANCE,
    half_extent: float = DEFAULT_HALF_EXTENT,
) -> dict:
    """Seeded scenario document: circular obstacles, then tasks placed by
    rejection so every point keeps the safety clearance.

    Tasks also stay within ``REACH_FRACTION`` of the smallest energy budget in
    the fleet from the base so every vehicle can make the round trip.
    """
    if n_tasks < 0 or n_obstacles < 0:
        raise ValueError("n_tasks and n_obstacles must be >= 0")
    if layout not in LAYOUTS:
        raise ValueError(f"layout must be one of {LAYOUTS}, got {layout!r}")
    if n_clusters < 1 or cluster_spread <= 0:
        raise ValueError("n_clusters must be >= 1 and cluster_spread > 0")
    if max_demand < 0:
        raise ValueError("max_demand must be >= 0")
    fleet = _fleet_from_spec(fleet_spec)
    rng = rng_for(seed, "scenario")
    h = float(half_extent)
    base = Point(0.0, 0.0)
    reach = REACH_FRACTION * min(v.energy_budget_cost for v in fleet.vehicles)
    attempts = 0

    def spend() -> None:
        nonlocal attempts
        attempts += 1
        if attempts > MAX_PLACEMENT_ATTEMPTS:
            raise PlacementError(
                f"could not place {n_tasks} tasks and {n_obstacles} obstacles within {MAX_PLACEMENT_ATTEMPTS} attempts"
            )

    obstacles: List[Obstacle] = []
    while len(obstacles) < n_obstacles:
        spend()
        cx, cy = (_c(v) for v in rng.uniform(-h, h, size=2))
        r = _c(rng.uniform(*OBSTACLE_RADIUS_RANGE))
        if math.hypot(cx - base.x, cy - base.y) - r >= safety_distance:
            obstacles.append(Obstacle(Point(cx, cy), r))

    centres = np.array([o.center.as_tuple() for o in obstacles], dtype=float).reshape(-1, 2)
    radii = np.array([o.radius for o in obstacles], dtype=float)
    limit = min(h, reach)
    clusters = [rng.uniform(-0.6 * limit, 0.6 * limit, size=2) for _ in range(n_clusters)] if layout == "clustered" else []

    tasks: List[TaskPoint] = []
    while len(tasks) < n_tasks:
        spend()
        if clusters:
            centre = clusters[len(tasks) % n_clusters]
            xy = centre + rng.normal(0.0, cluster_spread, size=2)
        else:
            xy = rng.uniform(-h, h, size=2)
        x, y = _c(xy[0]), _c(xy[1])
        demand = _c(rng.uniform(0.0, max_demand)) if max_demand > 0 else 0.0
        if h - max(abs(x), abs(y)) < safety_distance or math.hypot(x, y) > reach:
            continue
        if len(radii) and float((np.hypot(centres[:, 0] - x, centres[:, 1] - y) - radii).min()) < safety_distance:
            continue
        tasks.append(TaskPoint(len(tasks), Point(x, y), demand))

    env = Environment(h, tuple(obstacles), tuple(tasks), base, float(safety_distance))
    generator = {"seed": seed, "layout": layout, "n_tasks": n_tasks, "n_obstacles": n_obstacles}
    if layout == "clustered":
        generator.update({"n_clusters": n_clusters, "cluster_spread": cluster_spread})
    if max_demand > 0:
        generator["max_demand"] = max_demand
    return scenario_document(env, fleet, generator=generator)


def result_document(scenario: dict, config: PipelineConfig, plan: MissionPlan, report: Optional[ValidationReport] = None, *, include_timings: bool = False) -> dict:
    doc = {
        "schema_version": RESULT_VERSION,
        "scenario_digest": id_for(scenario),
        "scenario": scenario,
        "config": config.staged().to_dict(),
        "plan": plan.to_dict(include_timings=include_timings),
    }
    if report is not None:
        doc["validation"] = report.to_dict()
    return doc


@dataclass
class ResultFile:
    document: dict
    scenario: ScenarioFile
    plan: MissionPlan


def parse_result(doc: dict) -> ResultFile:
    errors = sorted(jsonschema.Draft7Validator(RESULT_SCHEMA).iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        raise ScenarioValidationError(e.message, field_path=_field_path(e.absolute_path))
    if id_for(doc["scenario"]) != doc["scenario_digest"]:
        raise ScenarioValidationError("embedded scenario does not match its digest", field_path="scenario_digest")
    return ResultFile(doc, parse_scenario(doc["scenario"]), MissionPlan.from_dict(doc["plan"]))


def read_result(path: PathLike) -> ResultFile:
    return parse_result(_read_json(path))


def save_result(path: PathLike, doc: dict) -> None:
    atomic_write_text(path, dumps_document(doc))


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else v for v in row])
    return buf.getvalue()


def write_ega_history(path: PathLike, history: Sequence[Tuple[int, float]]) -> None:
    atomic_write_text(path, _csv_text(["generation", "best_cost_m"], [(g, repr(float(c))) for g, c in history]))


def write_cmaes_history(path: PathLike, histories: Dict[int, Sequence[Tuple[int, float]]]) -> None:
    rows = [(v, g, repr(float(c))) for v in sorted(histories) for g, c in histories[v]]
    atomic_write_text(path, _csv_text(["vehicle_id", "generation", "best_cost_m"], rows))


COMPARISON_COLUMNS = ["arm", "seed", "status", "makespan_min", "total_length_km", "total_energy_j", "feasible"]


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.6f}"
    return v


def comparison_rows(table: ComparisonTable, *, with_runtime: bool = False, medians: bool = True) -> Tuple[List[str], List[list]]:
    header = COMPARISON_COLUMNS + (["runtime_s"] if with_runtime else []) + ["error"]
    rows = []
    body: List[ComparisonRow] = list(table.rows) + (table.medians() if medians else [])
    for r in body:
        row = [r.arm, "" if r.status == "median" else r.seed, r.status, r.makespan_min, r.total_length_km, r.total_energy_j, r.feasible]
        if with_runtime:
            row.append(r.runtime_s)
        row.append(r.error)
        rows.append([_fmt(v) for v in row])
    return header, rows


def write_comparison_csv(path: PathLike, table: ComparisonTable, *, with_runtime: bool = False) -> None:
    header, rows = comparison_rows(table, with_runtime=with_runtime)
    atomic_write_text(path, _csv_text(header, rows))


def write_sweep_csv(path: PathLike, tables: Sequence[Tuple[Tuple[int, int, int], ComparisonTable]], *, with_runtime: bool = False) -> None:
    """One block of rows per scale ``(n_tasks, n_uav, n_ugv)``."""
    header: List[str] = []
    rows: List[list] = []
    for (n_tasks, n_uav, n_ugv), table in tables:
        h, body = comparison_rows(table, with_runtime=with_runtime)
        header = ["n_tasks", "n_uav", "n_ugv"] + h
        rows.extend([n_tasks, n_uav, n_ugv] + r for r in body)
    atomic_write_text(path, _csv_text(header or ["n_tasks", "n_uav", "n_ugv"] + COMPARISON_COLUMNS + ["error"], rows))


def read_csv(path: PathLike) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
