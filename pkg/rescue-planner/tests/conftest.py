import math

import pytest

from rescue_planner.env_model import Environment, Obstacle, Point, TaskPoint
from rescue_planner.fleet_model import default_fleet
from rescue_planner.mission_pipeline import PipelineConfig
from rescue_planner.scenario_io import parse_scenario, save_scenario, scenario_document


def build_env(tasks=(), obstacles=(), *, half_extent=10_000.0, safety=50.0, base=(0.0, 0.0), demands=None):
    return Environment(
        half_extent=half_extent,
        obstacles=tuple(Obstacle(Point(cx, cy), r) for cx, cy, r in obstacles),
        tasks=tuple(
            TaskPoint(i, Point(x, y), (demands[i] if demands else 0.0)) for i, (x, y) in enumerate(tasks)
        ),
        base=Point(*base),
        safety_distance=safety,
    )


def ring(center, radius, n, r):
    """``n`` discs of radius ``r`` evenly spaced on a circle around ``center``."""
    cx, cy = center
    return [(cx + radius * math.cos(2 * math.pi * k / n), cy + radius * math.sin(2 * math.pi * k / n), r) for k in range(n)]


@pytest.fixture
def make_env():
    return build_env


@pytest.fixture
def make_ring():
    return ring


@pytest.fixture(autouse=True)
def audit_in_tmp(tmp_path, monkeypatch):
    monkeypatch.setenv("RESCUE_PLANNER_AUDIT_PATH", str(tmp_path / "audit.log"))
    monkeypatch.delenv("RESCUE_PLANNER_THREADS", raising=False)
    return tmp_path / "audit.log"


FAST_DEFAULTS = {
    "ega": {"population_size": 30, "generations": 40},
    "rrt": {"max_iterations": 3000},
    "cmaes": {"max_generations": 60, "stagnation_window": 20, "restarts": 1},
}


@pytest.fixture
def fast_config():
    return PipelineConfig.resolve(FAST_DEFAULTS)


SMALL_TASKS = [(1100, 0), (900, 800), (-700, 1000), (-1200, -200), (-400, -1100), (700, -900)]
# both discs sit across straight base-to-task lines
SMALL_OBSTACLES = [(550, 0, 180), (-450, 550, 160)]


@pytest.fixture
def small_scenario():
    """Compact 6-task, 2-obstacle scenario with a 2 UAV + 1 UGV fleet."""
    env = build_env(SMALL_TASKS, SMALL_OBSTACLES)
    return scenario_document(env, default_fleet(2, 1))


@pytest.fixture
def small_world(small_scenario):
    return parse_scenario(small_scenario)


@pytest.fixture
def scenario_file(tmp_path, small_scenario):
    """The small scenario on disk, carrying the fast settings as its defaults."""
    path = tmp_path / "scenario.json"
    save_scenario(path, dict(small_scenario, defaults=FAST_DEFAULTS))
    return path
