import copy

import pytest

from rescue_planner.errors import ScenarioValidationError
from rescue_planner.scenario_io import parse_scenario


def _set(path, value):
    def apply(doc):
        target = doc
        for key in path[:-1]:
            target = target[key]
        target[path[-1]] = value

    return apply


def _drop(key):
    def apply(doc):
        del doc[key]

    return apply


CASES = [
    ("world missing", _drop("world"), ""),
    ("negative half extent", _set(["world", "half_extent"], -1.0), "world.half_extent"),
    ("negative safety distance", _set(["world", "safety_distance"], -5.0), "world.safety_distance"),
    ("zero obstacle radius", _set(["obstacles", 0, "r"], 0), "obstacles[0].r"),
    ("unknown vehicle kind", _set(["fleet", 0, "kind"], "boat"), "fleet[0].kind"),
    ("negative demand", _set(["tasks", 0, "demand"], -2.0), "tasks[0].demand"),
    ("duplicate task id", _set(["tasks", 1, "id"], 0), "tasks[1].id"),
    ("duplicate vehicle id", _set(["fleet", 1, "id"], 0), "fleet"),
    ("task outside world", _set(["tasks", 3, "x"], 20_000.0), "tasks[3]"),
    ("base inside obstacle", _set(["base"], {"x": 550.0, "y": 0.0}), "base"),
    ("unknown defaults section", _set(["defaults"], {"planner": {}}), "defaults"),
    ("negative vehicle speed", _set(["fleet", 2, "max_speed"], -1.0), "fleet[2].max_speed"),
    ("energy budget above range", _set(["fleet", 0, "energy_budget_cost"], 99_000.0), "fleet[0]"),
]


@pytest.mark.parametrize("name,mutate,field_path", CASES, ids=[c[0] for c in CASES])
def test_malformed_scenario_rejected(small_scenario, name, mutate, field_path):
    doc = copy.deepcopy(small_scenario)
    mutate(doc)
    with pytest.raises(ScenarioValidationError) as exc:
        parse_scenario(doc)
    assert exc.value.field_path == field_path
    assert exc.value.to_dict()["code"] == "invalid_scenario"


@pytest.mark.parametrize("doc", [[], "scenario", 3])
def test_non_object_documents(doc):
    with pytest.raises(ScenarioValidationError):
        parse_scenario(doc)
