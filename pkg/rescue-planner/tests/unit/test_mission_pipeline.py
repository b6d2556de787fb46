from dataclasses import replace

import pytest

from rescue_planner.baselines import BaselineKind
from rescue_planner.env_model import Point
from rescue_planner.errors import PipelineError, PreconditionError
from rescue_planner.fleet_model import default_fleet
from rescue_planner.irrt_planner import PlannedPath
from rescue_planner.mission_pipeline import (
    MissionPlan,
    PipelineConfig,
    compare_allocators,
    run_pipeline,
    validate_plan,
)


def test_single_task_makespan(make_env, fast_config):
    env = make_env(tasks=[(3000, 4000)])
    plan = run_pipeline(env, default_fleet(1, 0), fast_config)
    assert plan.makespan == pytest.approx(10_000.0 / 16.667, rel=0.01)
    assert plan.total_length == pytest.approx(10_000.0, rel=0.01)
    assert plan.vehicles[0].route == (0,)
    assert plan.feasible


def test_empty_mission(make_env, fast_config):
    plan = run_pipeline(make_env(), default_fleet(2, 1), fast_config)
    assert plan.makespan == 0.0
    assert plan.total_length == 0.0
    assert plan.total_energy == 0.0
    assert plan.feasible
    assert plan.min_vehicle_separation is None
    assert validate_plan(make_env(), default_fleet(2, 1), plan).ok


def test_pipeline_output_validates(small_world, fast_config):
    plan = run_pipeline(small_world.env, small_world.fleet, fast_config)
    report = validate_plan(small_world.env, small_world.fleet, plan)
    assert report.ok, report.to_dict()
    assert plan.assignment().is_partition(small_world.env.task_ids)
    assert plan.makespan == max(v.mission_time for v in plan.vehicles)
    assert abs(plan.total_length - sum(v.route_cost for v in plan.vehicles)) <= 1e-9
    for v in plan.vehicles:
        spec = small_world.fleet.vehicle(v.vehicle_id)
        assert v.energy == spec.energy_rate * v.route_cost


def test_improvement_summary(small_world, fast_config):
    plan = run_pipeline(small_world.env, small_world.fleet, fast_config)
    imp = plan.improvement
    assert imp["straight_line_after_m"] <= imp["straight_line_before_m"]
    assert 0.0 <= imp["fraction"] < 1.0
    assert set(plan.timings) == {"allocate", "sequence", "plan"}


def test_cmaes_not_worse_than_without(small_world, fast_config):
    on = run_pipeline(small_world.env, small_world.fleet, fast_config)
    off = run_pipeline(small_world.env, small_world.fleet, replace(fast_config, enable_cmaes=False))
    assert off.improvement is None
    assert on.total_length <= 1.02 * off.total_length


def test_pipeline_is_deterministic(small_world, fast_config):
    a = run_pipeline(small_world.env, small_world.fleet, fast_config)
    b = run_pipeline(small_world.env, small_world.fleet, replace(fast_config, workers=4))
    assert a.to_dict() == b.to_dict()


def test_collision_fault_is_reported_once(make_env, fast_config):
    env = make_env(tasks=[(4000, 0)], obstacles=[(0, 3000, 600)])
    fleet = default_fleet(1, 0)
    plan = run_pipeline(env, fleet, fast_config)
    vp = plan.vehicles[0]
    leg = vp.legs[0]
    # route the outbound leg through the obstacle centre without changing its cost
    broken = PlannedPath((leg.start, Point(0, 3000), leg.goal), leg.cost)
    bad = replace(plan, vehicles=(replace(vp, legs=(broken,) + vp.legs[1:]),))
    report = validate_plan(env, fleet, bad)
    assert len(report.of_kind("collision")) == 1
    assert report.of_kind("collision")[0].leg_index == 0


def test_duplicated_task_is_partition_violation(make_env, fast_config):
    env = make_env(tasks=[(2000, 0), (-2000, 0), (0, 2500)])
    fleet = default_fleet(2, 0)
    plan = run_pipeline(env, fleet, replace(fast_config, allocator=BaselineKind.KMEANS))
    v0, v1 = plan.vehicles
    stolen = v0.route[0] if v0.route else v1.route[0]
    target = v1 if v0.route else v0
    vehicles = tuple(replace(v, route=v.route + (stolen,)) if v is target else v for v in plan.vehicles)
    report = validate_plan(env, fleet, replace(plan, vehicles=vehicles))
    assert report.of_kind("partition")


def test_tampered_metrics_are_reported(small_world, fast_config):
    plan = run_pipeline(small_world.env, small_world.fleet, fast_config)
    report = validate_plan(small_world.env, small_world.fleet, replace(plan, makespan=plan.makespan + 1.0))
    assert [v.kind for v in report.violations] == ["metric"]


def test_unreachable_leg_names_vehicle_and_arm(make_env, make_ring, fast_config):
    env = make_env(tasks=[(5000, 0)], obstacles=make_ring((5000, 0), 600, 12, 250))
    cfg = PipelineConfig.resolve({"ega": {"population_size": 10, "generations": 3}, "rrt": {"max_iterations": 300}})
    with pytest.raises(PipelineError) as exc:
        run_pipeline(env, default_fleet(1, 0), cfg)
    assert exc.value.arm == "ega"
    assert exc.value.vehicle_id == 0
    assert exc.value.leg_index == 0
    assert "[ega]" in str(exc.value)


def test_plan_serialisation_preserves_validation(small_world, fast_config):
    plan = run_pipeline(small_world.env, small_world.fleet, fast_config)
    restored = MissionPlan.from_dict(plan.to_dict())
    assert restored.makespan == plan.makespan
    assert validate_plan(small_world.env, small_world.fleet, restored).ok


def test_compare_needs_two_arms(small_world, fast_config):
    with pytest.raises(PreconditionError):
        compare_allocators(small_world.env, small_world.fleet, fast_config, [BaselineKind.EGA])


def test_compare_rows_and_medians(small_world, fast_config):
    arms = [BaselineKind.EGA, BaselineKind.KMEANS, BaselineKind.RANDOM]
    table = compare_allocators(small_world.env, small_world.fleet, fast_config, arms, seeds=[0, 1])
    assert len(table.rows) == 6
    assert table.arms() == ["ega", "kmeans", "random"]
    assert all(r.status == "ok" for r in table.rows)
    medians = table.medians()
    assert [m.arm for m in medians] == ["ega", "kmeans", "random"]
    assert all(m.status == "median" for m in medians)


def test_duplicated_arm_gives_identical_rows(small_world, fast_config):
    table = compare_allocators(small_world.env, small_world.fleet, fast_config, [BaselineKind.KMEANS, BaselineKind.KMEANS])
    assert table.rows[0] == table.rows[1]


def test_config_resolution_precedence():
    defaults = {"ega": {"generations": 50, "population_size": 40}, "pipeline": {"seed": 3}}
    flags = {"ega": {"generations": 10, "objective": None}, "pipeline": {"allocator": "kmeans", "seed": None}}
    cfg = PipelineConfig.resolve(defaults, flags)
    assert cfg.ega.generations == 10
    assert cfg.ega.population_size == 40
    assert cfg.seed == 3
    assert cfg.allocator is BaselineKind.KMEANS
    with pytest.raises(ValueError):
        PipelineConfig.resolve({"planner": {}})
    with pytest.raises(ValueError):
        PipelineConfig.resolve({"pipeline": {"speed": 2}})


def test_stage_seeds_follow_root_seed():
    a = PipelineConfig(seed=1).staged()
    b = PipelineConfig(seed=2).staged()
    assert len({a.ega.seed, a.rrt.seed, a.cmaes.seed}) == 3
    assert a.ega.seed != b.ega.seed
    assert PipelineConfig(seed=1).staged() == a
    assert PipelineConfig.from_dict(a.to_dict()) == a
