import numpy as np
import pytest

from rescue_planner.determinism import canonical_json, derive_seed, id_for, rng_for
from rescue_planner.errors import LegPlanningError, NoPathFound, PipelineError, ScenarioValidationError
from rescue_planner.runtime import default_workers, map_ordered


def test_canonical_json_ignores_key_order():
    assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
    assert id_for({"b": 1, "a": 2}) == id_for({"a": 2, "b": 1})
    assert len(id_for({})) == 64


def test_derived_seeds_are_stable_and_distinct():
    assert derive_seed(7, "ega") == derive_seed(7, "ega")
    assert derive_seed(7, "ega") != derive_seed(7, "rrt")
    assert derive_seed(7, "ega", 1) != derive_seed(7, "ega", 2)
    assert 0 <= derive_seed(2**40, "x") < 2**63


def test_rng_streams_repeat():
    a = rng_for(3, "init", 0).random(5)
    b = rng_for(3, "init", 0).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, rng_for(3, "init", 1).random(5))


def test_map_ordered_keeps_input_order():
    items = list(range(50))
    assert map_ordered(lambda x: x * x, items, workers=8) == [x * x for x in items]
    assert map_ordered(lambda x: x + 1, [], workers=4) == []


def test_map_ordered_propagates_errors():
    def boom(x):
        if x == 3:
            raise NoPathFound("blocked", iterations=10)
        return x

    with pytest.raises(NoPathFound):
        map_ordered(boom, range(6), workers=3)


def test_default_workers_from_env(monkeypatch):
    monkeypatch.setenv("RESCUE_PLANNER_THREADS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("RESCUE_PLANNER_THREADS", "zero")
    with pytest.raises(ValueError):
        default_workers()
    monkeypatch.setenv("RESCUE_PLANNER_THREADS", "0")
    with pytest.raises(ValueError):
        default_workers()
    monkeypatch.delenv("RESCUE_PLANNER_THREADS")
    assert 1 <= default_workers() <= 8


def test_error_payloads():
    err = ScenarioValidationError("bad coordinate", field_path="tasks[3].x", task_id=3)
    assert err.to_dict() == {"status": "error", "code": "invalid_scenario", "message": "tasks[3].x: bad coordinate"}
    assert err.exit_code == 1


def test_leg_error_chain():
    cause = NoPathFound("iteration budget spent", iterations=500)
    leg = LegPlanningError(2, 1, "task 4", "task 7", cause)
    assert isinstance(leg, NoPathFound)
    assert leg.iterations == 500
    assert leg.code == "leg_failed"
    assert "vehicle 2 leg 1 (task 4 -> task 7)" in leg.reason
    wrapped = PipelineError(leg.reason, arm="kmeans", vehicle_id=2, leg_index=1)
    assert str(wrapped).startswith("pipeline_failed: [kmeans] vehicle 2")
