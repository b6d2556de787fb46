"""rescue-planner command line.

Exit codes: 0 success, 1 domain error (no path, infeasible plan, invalid
scenario), 2 usage error or unreadable input.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .audit import configure_logging, safe_audit, utc_now
from .baselines import BaselineKind
from .determinism import id_for
from .errors import PlannerError
from .fleet_model import default_fleet
from .mission_pipeline import ComparisonTable, PipelineConfig, compare_allocators, run_pipeline, validate_plan
from .runtime import default_workers
from .scenario_io import (
    LAYOUTS,
    atomic_write_text,
    dumps_document,
    generate_scenario,
    parse_scenario,
    read_result,
    read_scenario,
    result_document,
    save_result,
    save_scenario,
    write_cmaes_history,
    write_comparison_csv,
    write_ega_history,
    write_sweep_csv,
)
from .svg_render import RenderOptions, render_svg

logger = logging.getLogger(__name__)

SWEEP_GRID: Tuple[Tuple[int, int, int], ...] = ((15, 10, 5), (30, 10, 5), (60, 20, 10))
OBJECTIVES = ("total_distance", "makespan", "weighted")


class UsageError(Exception):
    pass


def _emit(obj: dict) -> None:
    print(json.dumps(obj, sort_keys=True))


def _fail(message: str, code: Optional[str] = None) -> None:
    body = {"status": "error", "message": message}
    if code:
        body["code"] = code
    print(json.dumps(body), file=sys.stderr)


def _arms(raw: str) -> List[BaselineKind]:
    try:
        return [BaselineKind.parse(a) for a in raw.split(",") if a.strip()]
    except ValueError as e:
        raise UsageError(str(e)) from None


def _ints(raw: str, name: str) -> List[int]:
    try:
        return [int(s) for s in raw.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"{name} must be a comma-separated list of integers, got {raw!r}") from None


def _scales(raw: Optional[str]) -> Tuple[Tuple[int, int, int], ...]:
    if not raw:
        return SWEEP_GRID
    out = []
    for item in raw.split(","):
        parts = item.strip().split(":")
        if len(parts) != 3:
            raise UsageError(f"scale {item!r} must look like TASKS:UAVS:UGVS")
        out.append(tuple(int(p) for p in parts))
    return tuple(out)


def _flag_layer(args: argparse.Namespace) -> dict:
    """Config overrides taken from command-line flags (None means unset)."""
    return {
        "pipeline": {
            "allocator": getattr(args, "allocator", None),
            "seed": getattr(args, "seed", None),
            "enable_cmaes": False if getattr(args, "no_cmaes", False) else None,
        },
        "ega": {
            "objective": getattr(args, "objective", None),
            "generations": getattr(args, "generations", None),
            "population_size": getattr(args, "population", None),
        },
        "rrt": {"max_iterations": getattr(args, "rrt_iterations", None)},
    }


def _resolve(defaults: dict, args: argparse.Namespace) -> PipelineConfig:
    try:
        return PipelineConfig.resolve(defaults, _flag_layer(args))
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from None


class Run:
    """Audit record of one CLI invocation."""

    def __init__(self, command: str, enabled: bool):
        self.entry: Dict[str, object] = {"ts": utc_now(), "command": command, "status": "ok"}
        self.enabled = enabled

    def describe(self, effective: dict, scenario_digest: Optional[str] = None) -> None:
        self.entry["effective_config"] = effective
        self.entry["scenario_digest"] = scenario_digest
        self.entry["run_id"] = id_for({"scenario": scenario_digest, "config": effective})
        _emit({"effective_config": effective})

    def finish(self, status: str, **fields) -> None:
        self.entry["status"] = status
        self.entry.update(fields)
        if self.enabled:
            safe_audit(self.entry)


def cmd_generate(args: argparse.Namespace, run: Run) -> int:
    effective = {
        "tasks": args.tasks,
        "obstacles": args.obstacles,
        "uavs": args.uavs,
        "ugvs": args.ugvs,
        "seed": args.seed,
        "layout": args.layout,
        "max_demand": args.max_demand,
        "safety_distance": args.safety_distance,
    }
    run.describe(effective)
    try:
        fleet = default_fleet(args.uavs, args.ugvs)
    except ValueError as e:
        raise UsageError(str(e)) from None
    doc = generate_scenario(
        args.tasks,
        args.obstacles,
        fleet,
        args.seed,
        layout=args.layout,
        max_demand=args.max_demand,
        safety_distance=args.safety_distance,
    )
    save_scenario(args.out, doc)
    summary = {"status": "ok", "out": str(args.out), "tasks": len(doc["tasks"]), "obstacles": len(doc["obstacles"]), "vehicles": len(doc["fleet"]), "scenario_digest": id_for(doc)}
    _emit(summary)
    run.finish("ok", summary=summary)
    return 0


def cmd_plan(args: argparse.Namespace, run: Run) -> int:
    sf = read_scenario(args.scenario)
    config = replace(_resolve(sf.defaults, args), workers=default_workers())
    run.describe(config.staged().to_dict(), sf.digest)
    plan = run_pipeline(sf.env, sf.fleet, config)
    report = validate_plan(sf.env, sf.fleet, plan)
    save_result(args.out, result_document(sf.document, config, plan, report, include_timings=args.timings))
    if args.history_dir:
        hist = Path(args.history_dir)
        hist.mkdir(parents=True, exist_ok=True)
        write_ega_history(hist / "ega_history.csv", plan.ega_history)
        write_cmaes_history(hist / "cmaes_history.csv", plan.cmaes_history)
    if args.svg:
        atomic_write_text(args.svg, render_svg(sf.env, plan, RenderOptions(title=f"{plan.allocator} plan")))
    summary = dict(plan.summary(), violations=len(report.violations), out=str(args.out))
    if plan.improvement:
        summary["cmaes_improvement"] = plan.improvement["fraction"]
    if args.timings:
        summary["timings_s"] = plan.timings
    ok = plan.feasible and report.ok
    summary["status"] = "ok" if ok else "infeasible"
    _emit(summary)
    run.finish(summary["status"], summary=summary)
    return 0 if ok else 1


def cmd_validate(args: argparse.Namespace, run: Run) -> int:
    rf = read_result(args.result)
    run.describe(rf.document["config"], rf.document["scenario_digest"])
    report = validate_plan(rf.scenario.env, rf.scenario.fleet, rf.plan)
    body = dict(report.to_dict(), status="ok" if report.ok else "invalid")
    _emit(body)
    run.finish(body["status"], summary={"violations": len(report.violations)})
    return 0 if report.ok else 1


def _comparison_summary(table: ComparisonTable) -> dict:
    return {
        "rows": len(table.rows),
        "errors": sum(1 for r in table.rows if r.status != "ok"),
        "medians": {m.arm: {"makespan_min": m.makespan_min, "total_length_km": m.total_length_km} for m in table.medians()},
    }


def cmd_compare(args: argparse.Namespace, run: Run) -> int:
    arms = _arms(args.arms)
    if len(arms) < 2:
        raise UsageError("--arms needs at least two arms")
    seeds = _ints(args.seeds, "--seeds")
    sf = read_scenario(args.scenario)
    config = _resolve(sf.defaults, args)
    effective = dict(config.staged().to_dict(), arms=[a.value for a in arms], seeds=seeds)
    run.describe(effective, sf.digest)
    table = compare_allocators(sf.env, sf.fleet, config, arms, seeds=seeds, with_runtime=args.with_runtime, workers=default_workers())
    write_comparison_csv(args.out, table, with_runtime=args.with_runtime)
    summary = dict(_comparison_summary(table), status="ok", out=str(args.out))
    _emit(summary)
    run.finish("ok", summary=summary)
    return 0


def cmd_render(args: argparse.Namespace, run: Run) -> int:
    rf = read_result(args.result)
    before = read_result(args.before).plan if args.before else None
    run.describe({"result": str(args.result), "before": str(args.before) if args.before else None}, rf.document["scenario_digest"])
    atomic_write_text(args.out, render_svg(rf.scenario.env, rf.plan, RenderOptions(title=f"{rf.plan.allocator} plan"), before=before))
    summary = {"status": "ok", "out": str(args.out)}
    _emit(summary)
    run.finish("ok", summary=summary)
    return 0


def cmd_sweep(args: argparse.Namespace, run: Run) -> int:
    arms = _arms(args.arms)
    if len(arms) < 2:
        raise UsageError("--arms needs at least two arms")
    seeds = _ints(args.seeds, "--seeds")
    scales = _scales(args.scales)
    config = _resolve({}, args)
    effective = dict(config.staged().to_dict(), arms=[a.value for a in arms], seeds=seeds, scales=[list(s) for s in scales], obstacles=args.obstacles)
    run.describe(effective)
    workers = default_workers()
    tables = []
    for n_tasks, n_uav, n_ugv in scales:
        table = ComparisonTable()
        for seed in seeds:
            sf = parse_scenario(generate_scenario(n_tasks, args.obstacles, (n_uav, n_ugv), seed))
            part = compare_allocators(sf.env, sf.fleet, replace(config, seed=seed), arms, with_runtime=args.with_runtime, workers=workers)
            table.rows.extend(part.rows)
        logger.info("sweep scale %s done: %s", (n_tasks, n_uav, n_ugv), _comparison_summary(table)["medians"])
        tables.append(((n_tasks, n_uav, n_ugv), table))
    write_sweep_csv(args.out, tables, with_runtime=args.with_runtime)
    summary = {
        "status": "ok",
        "out": str(args.out),
        "scales": {f"{n}:{u}:{g}": _comparison_summary(t)["medians"] for (n, u, g), t in tables},
    }
    _emit(summary)
    run.finish("ok", summary=summary)
    return 0


def _add_tuning(p: argparse.ArgumentParser) -> None:
    p.add_argument("--objective", choices=OBJECTIVES, help="EGA objective (default total_distance)")
    p.add_argument("--generations", type=int, help="EGA generations")
    p.add_argument("--rrt-iterations", type=int, dest="rrt_iterations", help="RRT* iterations per leg")
    p.add_argument("--no-cmaes", action="store_true", help="skip CMA-ES sequence refinement")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rescue-planner", description="UAV/UGV rescue mission planning")
    ap.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    ap.add_argument("--no-audit", action="store_true", help="do not append to the audit log")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded scenario file")
    g.add_argument("--tasks", type=int, required=True)
    g.add_argument("--obstacles", type=int, required=True)
    g.add_argument("--uavs", type=int, required=True)
    g.add_argument("--ugvs", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--layout", choices=LAYOUTS, default="uniform")
    g.add_argument("--max-demand", type=float, default=0.0, dest="max_demand")
    g.add_argument("--safety-distance", type=float, default=50.0, dest="safety_distance")
    g.set_defaults(handler=cmd_generate)

    p = sub.add_parser("plan", help="allocate, sequence and plan one scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--allocator", choices=[k.value for k in BaselineKind])
    p.add_argument("--seed", type=int)
    p.add_argument("--population", type=int, help="EGA population size")
    _add_tuning(p)
    p.add_argument("--svg", help="also write an SVG rendering")
    p.add_argument("--history-dir", dest="history_dir", help="directory for convergence CSVs")
    p.add_argument("--timings", action="store_true", help="record stage timings in the result")
    p.set_defaults(handler=cmd_plan)

    v = sub.add_parser("validate", help="re-check a result document")
    v.add_argument("--result", required=True)
    v.set_defaults(handler=cmd_validate)

    c = sub.add_parser("compare", help="run allocation arms across seeds")
    c.add_argument("--scenario", required=True)
    c.add_argument("--arms", default="ega,kmeans,random")
    c.add_argument("--seeds", default="0")
    c.add_argument("--out", required=True)
    _add_tuning(c)
    c.add_argument("--with-runtime", action="store_true", dest="with_runtime")
    c.set_defaults(handler=cmd_compare)

    r = sub.add_parser("render", help="draw a result document as SVG")
    r.add_argument("--result", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--before", help="second result drawn underneath")
    r.set_defaults(handler=cmd_render)

    s = sub.add_parser("sweep", help="compare arms over the 15/30/60-task grid")
    s.add_argument("--seeds", default="0")
    s.add_argument("--arms", default="ega,kmeans,random")
    s.add_argument("--out", required=True)
    s.add_argument("--obstacles", type=int, default=5)
    s.add_argument("--scales", help="override the grid, e.g. 15:10:5,30:10:5")
    _add_tuning(s)
    s.add_argument("--with-runtime", action="store_true", dest="with_runtime")
    s.set_defaults(handler=cmd_sweep)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    configure_logging(args.log_level)
    run = Run(args.command, enabled=not args.no_audit)
    handler: Callable[[argparse.Namespace, Run], int] = args.handler
    try:
        return handler(args, run)
    except UsageError as e:
        _fail(str(e), "usage")
        run.finish("error", error=str(e))
        return 2
    except PlannerError as e:
        body = e.to_dict()
        print(json.dumps(body), file=sys.stderr)
        run.finish("error", error=body)
        return e.exit_code
    except OSError as e:
        _fail(f"cannot access {getattr(e, 'filename', None) or 'file'}: {e.strerror or e}", "io")
        run.finish("error", error=str(e))
        return 2
    except ValueError as e:
        _fail(str(e), "usage")
        run.finish("error", error=str(e))
        return 2
