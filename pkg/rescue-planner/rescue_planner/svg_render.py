"""Static SVG map of a mission plan.

World y points up, SVG y points down, so every y is negated and the viewBox is
the world square. UAV tracks are solid, UGV tracks dashed; a second plan can
be overlaid as a faded "before" layer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence
from xml.etree import ElementTree as ET

from .env_model import Environment, Point
from .fleet_model import VehicleKind
from .mission_pipeline import MissionPlan, VehiclePlan

SVG_NS = "http://www.w3.org/2000/svg"
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


@dataclass(frozen=True)
class RenderOptions:
    width_px: int = 900
    title: str = "mission plan"
    show_labels: bool = True
    show_legend: bool = True

    def __post_init__(self):
        if self.width_px < 50:
            raise ValueError("width_px must be >= 50")


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".") or "0"


def _points_attr(points: Iterable[Point]) -> str:
    return " ".join(f"{_fmt(p.x)},{_fmt(-p.y)}" for p in points)


def _clamp(env: Environment, p: Point) -> Point:
    h = env.half_extent
    return Point(min(max(p.x, -h), h), min(max(p.y, -h), h))


def _track_style(vp: VehiclePlan, color: str, unit: float, before: bool) -> dict:
    style = {
        "fill": "none",
        "stroke": color,
        "stroke-width": _fmt(unit * (1.0 if before else 1.6)),
        "stroke-linejoin": "round",
    }
    if vp.kind == VehicleKind.UGV:
        style["stroke-dasharray"] = f"{_fmt(unit * 6)} {_fmt(unit * 4)}"
    if before:
        style["stroke-opacity"] = "0.45"
        style["stroke-dasharray"] = f"{_fmt(unit * 1.5)} {_fmt(unit * 2.5)}"
    return style


def _tracks(parent: ET.Element, env: Environment, vehicles: Sequence[VehiclePlan], colors: dict, unit: float, layer: str) -> None:
    group = ET.SubElement(parent, "g", {"class": f"trajectories {layer}"})
    for vp in vehicles:
        if not vp.route:
            continue
        attrs = {
            "class": f"trajectory {layer} {vp.kind.value.lower()}",
            "data-vehicle": str(vp.vehicle_id),
            "points": _points_attr(_clamp(env, p) for p in vp.waypoints()),
        }
        attrs.update(_track_style(vp, colors[vp.vehicle_id], unit, layer == "before"))
        ET.SubElement(group, "polyline", attrs)


def render_svg(env: Environment, plan: Optional[MissionPlan], options: Optional[RenderOptions] = None, *, before: Optional[MissionPlan] = None) -> str:
    """SVG text for ``plan`` over ``env``; ``plan`` may be None for a bare map."""
    opts = options or RenderOptions()
    h = env.half_extent
    unit = h / 250.0
    root = ET.Element(
        "svg",
        {
            "xmlns": SVG_NS,
            "viewBox": f"{_fmt(-h)} {_fmt(-h)} {_fmt(2 * h)} {_fmt(2 * h)}",
            "width": str(opts.width_px),
            "height": str(opts.width_px),
        },
    )
    ET.SubElement(root, "title").text = opts.title
    ET.SubElement(root, "rect", {"x": _fmt(-h), "y": _fmt(-h), "width": _fmt(2 * h), "height": _fmt(2 * h), "fill": "#ffffff", "stroke": "#000000", "stroke-width": _fmt(unit)})

    obstacles = ET.SubElement(root, "g", {"class": "obstacles"})
    for o in env.obstacles:
        ET.SubElement(obstacles, "circle", {"cx": _fmt(o.center.x), "cy": _fmt(-o.center.y), "r": _fmt(o.radius), "fill": "#9e9e9e", "fill-opacity": "0.8"})

    vehicles: List[VehiclePlan] = list(plan.vehicles) if plan else []
    ids = sorted({vp.vehicle_id for vp in vehicles} | ({vp.vehicle_id for vp in before.vehicles} if before else set()))
    colors = {vid: PALETTE[i % len(PALETTE)] for i, vid in enumerate(ids)}
    if before is not None:
        _tracks(root, env, before.vehicles, colors, unit, "before")
    _tracks(root, env, vehicles, colors, unit, "after")

    markers = ET.SubElement(root, "g", {"class": "markers"})
    s = unit * 5
    bx, by = (min(max(v - s, -h), h - 2 * s) for v in (env.base.x, -env.base.y))
    ET.SubElement(markers, "rect", {"class": "base", "x": _fmt(bx), "y": _fmt(by), "width": _fmt(2 * s), "height": _fmt(2 * s), "fill": "#000000"})
    for t in env.tasks:
        ET.SubElement(markers, "circle", {"class": "task", "cx": _fmt(t.location.x), "cy": _fmt(-t.location.y), "r": _fmt(unit * 3), "fill": "#d50000"})
        if opts.show_labels:
            label = _clamp(env, Point(t.location.x + unit * 4, t.location.y + unit * 4))
            ET.SubElement(markers, "text", {"x": _fmt(label.x), "y": _fmt(-label.y), "font-size": _fmt(unit * 10)}).text = f"T{t.id}"

    if opts.show_legend and ids:
        legend = ET.SubElement(root, "g", {"class": "legend"})
        x0, y0 = -h + unit * 10, -h + unit * 14
        kinds = {vp.vehicle_id: vp.kind for vp in vehicles + (list(before.vehicles) if before else [])}
        for row, vid in enumerate(ids):
            y = y0 + row * unit * 14
            if y > h - unit * 4:
                break
            line = {"x1": _fmt(x0), "y1": _fmt(y), "x2": _fmt(x0 + unit * 30), "y2": _fmt(y), "stroke": colors[vid], "stroke-width": _fmt(unit * 2)}
            if kinds[vid] == VehicleKind.UGV:
                line["stroke-dasharray"] = f"{_fmt(unit * 6)} {_fmt(unit * 4)}"
            ET.SubElement(legend, "line", line)
            ET.SubElement(legend, "text", {"x": _fmt(x0 + unit * 35), "y": _fmt(y + unit * 3), "font-size": _fmt(unit * 9)}).text = f"{kinds[vid].value} {vid}"

    return ET.tostring(root, encoding="unicode", xml_declaration=False) + "\n"
