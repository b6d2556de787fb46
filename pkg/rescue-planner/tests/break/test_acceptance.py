"""Seed-swept quality claims for the allocators and the sequencer.

These take minutes; run with ``pytest -m slow``.
"""
import itertools
import math
import statistics

import numpy as np
import pytest

from rescue_planner.baselines import kmeans_assign, random_assign, standard_ga
from rescue_planner.cmaes_seq import CmaesParams, improvement_report, optimize_sequence, tour_cost
from rescue_planner.ega_alloc import EgaParams, Objective, run_ega
from rescue_planner.env_model import Point
from rescue_planner.fleet_model import default_fleet, route_feasible
from rescue_planner.scenario_io import generate_scenario, parse_scenario

pytestmark = pytest.mark.slow

BASE = Point(0, 0)


def _makespan(env, fleet, assignment):
    """Straight-line mission time of the slowest vehicle; inf if any vehicle
    breaks its range, energy or payload limit."""
    worst = 0.0
    for spec in fleet.vehicles:
        route = assignment.route(spec.id)
        locs = [env.location(t) for t in route]
        length = tour_cost(range(len(locs)), locs, env.base)
        if not route_feasible(spec, length, sum(env.task(t).demand for t in route)).feasible:
            return math.inf
        worst = max(worst, length / spec.max_speed)
    return worst


def _points(rng, n, spread):
    return [Point(x, y) for x, y in rng.uniform(-spread, spread, size=(n, 2))]


def test_ega_makespan_beats_baselines():
    ega, kmeans, rand = [], [], []
    for seed in range(20):
        sf = parse_scenario(generate_scenario(15, 5, (10, 5), seed))
        params = EgaParams(objective=Objective.MAKESPAN, seed=seed)
        ega.append(_makespan(sf.env, sf.fleet, run_ega(sf.env, sf.fleet, params).best))
        kmeans.append(_makespan(sf.env, sf.fleet, kmeans_assign(sf.env, sf.fleet, seed)))
        rand.append(_makespan(sf.env, sf.fleet, random_assign(sf.env, sf.fleet, seed)))
    assert all(math.isfinite(m) for m in ega)
    assert statistics.median(ega) < statistics.median(kmeans)
    assert statistics.median(ega) < statistics.median(rand)
    assert sum(e < k for e, k in zip(ega, kmeans)) >= 16
    assert sum(e < r for e, r in zip(ega, rand)) >= 16


def test_makespan_scales_with_fleet():
    medians = {}
    for n_tasks, fleet in ((30, (10, 5)), (60, (20, 10))):
        spans = []
        for seed in range(10):
            sf = parse_scenario(generate_scenario(n_tasks, 5, fleet, seed))
            result = run_ega(sf.env, sf.fleet, EgaParams(objective=Objective.MAKESPAN, seed=seed))
            spans.append(_makespan(sf.env, sf.fleet, result.best))
        medians[n_tasks] = statistics.median(spans)
    assert medians[60] <= 1.2 * medians[30]


def test_cmaes_improves_random_orders():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        pts = _points(rng, 12, 4000.0)
        incumbent = tuple(int(i) for i in rng.permutation(12))
        before = tour_cost(incumbent, pts, BASE)
        result = optimize_sequence(pts, BASE, CmaesParams(seed=seed), incumbent=incumbent)
        assert improvement_report(before, result.cost) >= 0.10


def test_cmaes_on_ega_routes_of_clustered_scenarios():
    reductions = []
    for seed in range(20):
        sf = parse_scenario(generate_scenario(15, 5, (3, 1), seed, layout="clustered"))
        allocation = run_ega(sf.env, sf.fleet, EgaParams(seed=seed)).best
        unordered = ordered = 0.0
        for spec in sf.fleet.vehicles:
            route = allocation.route(spec.id)
            locs = [sf.env.location(t) for t in route]
            result = optimize_sequence(locs, sf.env.base, CmaesParams(seed=seed))
            assert result.cost <= result.history[0][1]
            by_id = sorted(range(len(route)), key=lambda i: route[i])
            unordered += tour_cost(by_id, locs, sf.env.base)
            ordered += tour_cost(result.order, locs, sf.env.base)
        reductions.append(improvement_report(unordered, ordered))
    assert statistics.median(reductions) >= 0.10


def test_cmaes_near_optimal_on_seven_tasks():
    hits = 0
    for seed in range(50):
        pts = _points(np.random.default_rng(100 + seed), 7, 3000.0)
        brute = min(tour_cost(p, pts, BASE) for p in itertools.permutations(range(7)))
        hits += optimize_sequence(pts, BASE, CmaesParams(seed=seed)).cost <= 1.02 * brute
    assert hits >= 40


def _optimal_split(env, n_vehicles):
    locs = [t.location for t in env.tasks]
    ids = range(len(locs))
    best_tour = {}

    def tour(subset):
        key = tuple(subset)
        if key not in best_tour:
            best_tour[key] = min(tour_cost(p, locs, env.base) for p in itertools.permutations(subset)) if subset else 0.0
        return best_tour[key]

    return min(
        sum(tour([i for i in ids if labels[i] == v]) for v in range(n_vehicles))
        for labels in itertools.product(range(n_vehicles), repeat=len(locs))
    )


def test_ega_finds_small_optimum(make_env):
    hits = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        env = make_env(tasks=[tuple(p) for p in rng.uniform(-1200, 1200, size=(6, 2))])
        result = run_ega(env, default_fleet(2, 0), EgaParams(seed=seed))
        hits += result.best_cost <= _optimal_split(env, 2) * (1 + 1e-9)
    assert hits >= 45


def test_ega_not_worse_than_standard_ga():
    wins = 0
    for seed in range(20):
        sf = parse_scenario(generate_scenario(20, 0, (3, 1), seed, half_extent=4000.0))
        params = EgaParams(population_size=50, generations=60, seed=seed)
        wins += run_ega(sf.env, sf.fleet, params).best_cost <= standard_ga(sf.env, sf.fleet, params).best_cost
    assert wins >= 14
