"""Determinism stress runner: repeat one pipeline run on a thread pool and
require every repetition to hash identically.
"""
from __future__ import annotations

import argparse
import json
import resource
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import replace
from typing import Any, Dict, List, Optional, Tuple

from .determinism import id_for
from .mission_pipeline import PipelineConfig, run_pipeline
from .scenario_io import generate_scenario, parse_scenario, result_document


def _run_one(run_id: int, scenario: dict, config: PipelineConfig) -> Tuple[int, Optional[str], Optional[str]]:
    try:
        sf = parse_scenario(scenario)
        plan = run_pipeline(sf.env, sf.fleet, config)
        return run_id, id_for(result_document(scenario, config, plan)), None
    except Exception:
        return run_id, None, traceback.format_exc()


def run_stress(scenario: dict, config: PipelineConfig, *, runs: int = 8, workers: int = 4, inner_workers: Optional[int] = None, fail_on_violation: bool = True) -> Dict[str, Any]:
    """Run the same (scenario, config) ``runs`` times concurrently.

    ``inner_workers`` sets the pipeline's own thread count, so serial and
    parallel inner execution can be mixed across a suite.
    """
    if runs < 1 or workers < 1:
        raise ValueError("runs and workers must be >= 1")
    cfg = replace(config, workers=inner_workers)
    start = time.perf_counter()
    start_rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss

    results = []
    with ThreadPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(_run_one, i, scenario, cfg) for i in range(runs)]
        for fut in as_completed(futures):
            results.append(fut.result())
    results.sort(key=lambda r: r[0])

    hashes = [h for _, h, _ in results if h is not None]
    errors = [err for _, _, err in results if err is not None]
    unique = sorted(set(hashes))
    reasons: List[str] = []
    if errors:
        reasons.append(f"{len(errors)} runs failed with errors")
    if len(unique) > 1:
        reasons.append("result hashes diverged")
    summary = {
        "runs": runs,
        "workers": workers,
        "inner_workers": inner_workers,
        "seed": config.seed,
        "ok": not reasons,
        "reasons": reasons,
        "unique_result_hashes": unique[:10],
        "failure_count": len(errors),
        "first_error": errors[0] if errors else None,
        "wall_time_sec": time.perf_counter() - start,
        "start_rss": start_rss,
        "peak_rss": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss,
    }
    if fail_on_violation and reasons:
        raise RuntimeError(f"determinism violated: {reasons}")
    return summary


def main(argv: Optional[List[str]] = None) -> int:
    p = argparse.ArgumentParser(prog="python -m rescue_planner.stress_runner")
    p.add_argument("--runs", type=int, default=8)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--inner-workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tasks", type=int, default=6)
    p.add_argument("--obstacles", type=int, default=3)
    p.add_argument("--generations", type=int, default=20)
    p.add_argument("--output", type=str, default=None, help="file path to write summary JSON")
    args = p.parse_args(argv)

    scenario = generate_scenario(args.tasks, args.obstacles, (2, 1), args.seed)
    config = PipelineConfig.resolve(
        {"pipeline": {"seed": args.seed}, "ega": {"population_size": 20, "generations": args.generations}, "rrt": {"max_iterations": 800}}
    )
    summary = run_stress(scenario, config, runs=args.runs, workers=args.workers, inner_workers=args.inner_workers, fail_on_violation=False)
    text = json.dumps(summary, indent=2)
    print(text)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0 if summary["ok"] else 2


if __name__ == "__main__":
    sys.exit(main())
