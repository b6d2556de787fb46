from dataclasses import replace
from xml.etree import ElementTree as ET

import pytest

from rescue_planner.mission_pipeline import run_pipeline
from rescue_planner.svg_render import SVG_NS, RenderOptions, render_svg

NS = f"{{{SVG_NS}}}"


@pytest.fixture
def planned(small_world, fast_config):
    return run_pipeline(small_world.env, small_world.fleet, fast_config)


def _polylines(root):
    return list(root.iter(f"{NS}polyline"))


def test_bare_map(small_world):
    root = ET.fromstring(render_svg(small_world.env, None))
    assert root.tag == f"{NS}svg"
    assert _polylines(root) == []
    obstacles = root.find(f"{NS}g[@class='obstacles']")
    assert len(obstacles) == len(small_world.env.obstacles)
    tasks = [c for c in root.iter(f"{NS}circle") if c.get("class") == "task"]
    assert len(tasks) == len(small_world.env.tasks)


def test_one_track_per_busy_vehicle(small_world, planned):
    root = ET.fromstring(render_svg(small_world.env, planned))
    lines = _polylines(root)
    busy = sorted(str(v.vehicle_id) for v in planned.vehicles if v.route)
    assert sorted(p.get("data-vehicle") for p in lines) == busy


def test_tracks_stay_in_viewport(small_world, planned):
    h = small_world.env.half_extent
    root = ET.fromstring(render_svg(small_world.env, planned))
    for line in _polylines(root):
        for pair in line.get("points").split():
            x, y = (float(v) for v in pair.split(","))
            assert -h <= x <= h and -h <= y <= h


def test_ugv_tracks_are_dashed(small_world, planned):
    root = ET.fromstring(render_svg(small_world.env, planned))
    for line in _polylines(root):
        dashed = line.get("stroke-dasharray") is not None
        assert dashed == ("ugv" in line.get("class").split())


def test_before_and_after_layers(small_world, planned, fast_config):
    before = run_pipeline(small_world.env, small_world.fleet, replace(fast_config, enable_cmaes=False))
    root = ET.fromstring(render_svg(small_world.env, planned, before=before))
    layers = {p.get("class").split()[1] for p in _polylines(root)}
    assert layers == {"before", "after"}
    faded = [p for p in _polylines(root) if "before" in p.get("class")]
    assert all(p.get("stroke-opacity") == "0.45" for p in faded)


def test_render_options():
    with pytest.raises(ValueError):
        RenderOptions(width_px=10)


def test_title_and_size(small_world):
    root = ET.fromstring(render_svg(small_world.env, None, RenderOptions(width_px=400, title="drill")))
    assert root.get("width") == "400"
    assert root.find(f"{NS}title").text == "drill"


@pytest.mark.parametrize("base", [(9_950.0, -9_950.0), (-9_950.0, 9_900.0), (0.0, 0.0)])
def test_base_marker_inside_viewport(make_env, base):
    env = make_env([(1000.0, 1000.0)], base=base)
    root = ET.fromstring(render_svg(env, None))
    rect = [r for r in root.iter(f"{NS}rect") if r.get("class") == "base"][0]
    h = env.half_extent
    x, y, w, ht = (float(rect.get(k)) for k in ("x", "y", "width", "height"))
    assert -h <= x and x + w <= h
    assert -h <= y and y + ht <= h
