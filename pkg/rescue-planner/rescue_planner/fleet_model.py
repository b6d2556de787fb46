"""Vehicle capability profiles and per-route feasibility checks.

Energy follows the distance proxy: a vehicle may spend at most
``energy_budget_cost`` metres of path, and consumes ``energy_rate`` J per metre.
The ``energy_rate`` defaults are placeholders; no published values exist.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple

KMH = 1000.0 / 3600.0

UAV_DEFAULTS = {"max_speed": 60.0 * KMH, "max_range": 15_000.0, "payload_capacity": 5.0, "energy_rate": 1.0}
UGV_DEFAULTS = {"max_speed": 30.0 * KMH, "max_range": 25_000.0, "payload_capacity": 50.0, "energy_rate": 2.0}


class VehicleKind(str, Enum):
    UAV = "UAV"
    UGV = "UGV"


@dataclass(frozen=True)
class VehicleSpec:
    id: int
    kind: VehicleKind
    max_speed: float
    max_range: float
    payload_capacity: float
    energy_rate: float
    energy_budget_cost: Optional[float] = None
    ignored_obstacles: FrozenSet[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "kind", VehicleKind(self.kind))
        if self.energy_budget_cost is None:
            object.__setattr__(self, "energy_budget_cost", float(self.max_range))
        object.__setattr__(self, "ignored_obstacles", frozenset(int(i) for i in self.ignored_obstacles))
        for name in ("max_speed", "max_range", "payload_capacity", "energy_rate", "energy_budget_cost"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"vehicle {self.id}: {name} must be a positive finite number, got {value!r}")
        if self.energy_budget_cost > self.max_range:
            raise ValueError(
                f"vehicle {self.id}: energy_budget_cost {self.energy_budget_cost} exceeds max_range {self.max_range}"
            )


@dataclass(frozen=True)
class Fleet:
    vehicles: Tuple[VehicleSpec, ...]
    _index: Dict[int, VehicleSpec] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "vehicles", tuple(self.vehicles))
        if not self.vehicles:
            raise ValueError("fleet must contain at least one vehicle")
        index: Dict[int, VehicleSpec] = {}
        for v in self.vehicles:
            if v.id in index:
                raise ValueError(f"duplicate vehicle id {v.id}")
            index[v.id] = v
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.vehicles)

    def __iter__(self):
        return iter(self.vehicles)

    @property
    def ids(self) -> Tuple[int, ...]:
        return tuple(v.id for v in self.vehicles)

    def vehicle(self, vehicle_id: int) -> VehicleSpec:
        return self._index[vehicle_id]

    def count(self, kind: VehicleKind) -> int:
        return sum(1 for v in self.vehicles if v.kind == kind)


def make_vehicle(vehicle_id: int, kind: VehicleKind, **overrides) -> VehicleSpec:
    base = dict(UAV_DEFAULTS if VehicleKind(kind) == VehicleKind.UAV else UGV_DEFAULTS)
    base.update(overrides)
    return VehicleSpec(id=vehicle_id, kind=VehicleKind(kind), **base)


def default_fleet(n_uav: int, n_ugv: int, *, uav_overrides: Optional[dict] = None, ugv_overrides: Optional[dict] = None) -> Fleet:
    """UAVs get ids ``0..n_uav-1``, UGVs follow."""
    if n_uav < 0 or n_ugv < 0:
        raise ValueError("vehicle counts must be >= 0")
    if n_uav + n_ugv < 1:
        raise ValueError("fleet must contain at least one vehicle")
    vehicles: List[VehicleSpec] = []
    for i in range(n_uav):
        vehicles.append(make_vehicle(i, VehicleKind.UAV, **(uav_overrides or {})))
    for j in range(n_ugv):
        vehicles.append(make_vehicle(n_uav + j, VehicleKind.UGV, **(ugv_overrides or {})))
    return Fleet(tuple(vehicles))


@dataclass(frozen=True)
class Violation:
    constraint: str  # range | energy | payload
    limit: float
    actual: float

    @property
    def magnitude(self) -> float:
        return self.actual - self.limit

    def to_dict(self) -> dict:
        return {"constraint": self.constraint, "limit": self.limit, "actual": self.actual, "magnitude": self.magnitude}


@dataclass(frozen=True)
class FeasibilityReport:
    vehicle_id: int
    violations: Tuple[Violation, ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.violations

    @property
    def total_violation(self) -> float:
        return sum(v.magnitude for v in self.violations)

    def magnitude(self, constraint: str) -> float:
        return sum(v.magnitude for v in self.violations if v.constraint == constraint)

    def to_dict(self) -> dict:
        return {"feasible": self.feasible, "violations": [v.to_dict() for v in self.violations]}


def route_feasible(spec: VehicleSpec, route_cost: float, route_demand: float) -> FeasibilityReport:
    """Check the closed-tour cost against range and energy, and demand against payload.

    Limits are inclusive: a cost exactly equal to ``max_range`` is feasible.
    """
    if route_cost < 0 or route_demand < 0:
        raise ValueError("route_cost and route_demand must be >= 0")
    violations = []
    if route_cost > spec.max_range:
        violations.append(Violation("range", spec.max_range, route_cost))
    if route_cost > spec.energy_budget_cost:
        violations.append(Violation("energy", spec.energy_budget_cost, route_cost))
    if route_demand > spec.payload_capacity:
        violations.append(Violation("payload", spec.payload_capacity, route_demand))
    return FeasibilityReport(spec.id, tuple(violations))
