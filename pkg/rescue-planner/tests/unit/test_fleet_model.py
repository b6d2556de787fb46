import pytest

from rescue_planner.fleet_model import Fleet, VehicleKind, VehicleSpec, default_fleet, make_vehicle, route_feasible


def test_default_fleet_shape():
    fleet = default_fleet(10, 5)
    assert len(fleet) == 15
    assert fleet.count(VehicleKind.UAV) == 10
    assert fleet.count(VehicleKind.UGV) == 5
    assert fleet.vehicle(0).max_range == 15_000.0
    assert fleet.ids == tuple(range(15))


def test_single_ugv_payload():
    fleet = default_fleet(0, 1)
    assert fleet.vehicles[0].kind == VehicleKind.UGV
    assert fleet.vehicles[0].payload_capacity == 50.0


def test_uav_speed_converted_from_kmh():
    assert default_fleet(1, 0).vehicles[0].max_speed == pytest.approx(16.667, abs=1e-3)


def test_route_inside_limits_is_feasible():
    report = route_feasible(make_vehicle(0, VehicleKind.UAV), 14_999.0, 5.0)
    assert report.feasible
    assert report.to_dict() == {"feasible": True, "violations": []}


def test_range_exceeded_by_one_metre():
    report = route_feasible(make_vehicle(0, VehicleKind.UAV), 15_001.0, 0.0)
    assert not report.feasible
    assert report.magnitude("range") == pytest.approx(1.0)


def test_payload_exceeded():
    report = route_feasible(make_vehicle(0, VehicleKind.UGV), 0.0, 50.5)
    assert [v.constraint for v in report.violations] == ["payload"]
    assert report.magnitude("payload") == pytest.approx(0.5)


def test_limits_are_inclusive():
    assert route_feasible(make_vehicle(0, VehicleKind.UAV), 15_000.0, 5.0).feasible


def test_energy_budget_tighter_than_range():
    spec = make_vehicle(0, VehicleKind.UAV, energy_budget_cost=12_000.0)
    report = route_feasible(spec, 13_000.0, 0.0)
    assert [v.constraint for v in report.violations] == ["energy"]
    assert report.total_violation == pytest.approx(1000.0)


def test_negative_inputs_rejected():
    with pytest.raises(ValueError):
        route_feasible(make_vehicle(0, VehicleKind.UAV), -1.0, 0.0)


def test_invalid_specs_rejected():
    with pytest.raises(ValueError):
        make_vehicle(0, VehicleKind.UAV, max_speed=0.0)
    with pytest.raises(ValueError):
        make_vehicle(0, VehicleKind.UGV, energy_budget_cost=30_000.0)
    with pytest.raises(ValueError):
        VehicleSpec(0, "BOAT", 1.0, 1.0, 1.0, 1.0)


def test_fleet_rejects_duplicates_and_empty():
    with pytest.raises(ValueError):
        Fleet((make_vehicle(1, VehicleKind.UAV), make_vehicle(1, VehicleKind.UGV)))
    with pytest.raises(ValueError):
        default_fleet(0, 0)


def test_overrides_apply_per_kind():
    fleet = default_fleet(1, 1, ugv_overrides={"payload_capacity": 80.0})
    assert fleet.vehicle(0).payload_capacity == 5.0
    assert fleet.vehicle(1).payload_capacity == 80.0


@pytest.mark.parametrize("spec", [
    make_vehicle(0, VehicleKind.UAV),
    make_vehicle(1, VehicleKind.UGV),
    make_vehicle(2, VehicleKind.UAV, energy_budget_cost=9_000.0),
])
def test_violations_grow_with_cost_and_demand(spec):
    costs = [0.0, 5_000.0, 9_000.0, 12_000.0, 15_000.0, 20_000.0, 30_000.0]
    demands = [0.0, 2.5, 5.0, 20.0, 50.0, 80.0]
    reports = {(c, w): route_feasible(spec, c, w) for c in costs for w in demands}
    for (c1, w1), r1 in reports.items():
        for (c2, w2), r2 in reports.items():
            if c1 <= c2 and w1 <= w2:
                assert {v.constraint for v in r1.violations} <= {v.constraint for v in r2.violations}
                assert r1.total_violation <= r2.total_violation
                assert r2.feasible <= r1.feasible
