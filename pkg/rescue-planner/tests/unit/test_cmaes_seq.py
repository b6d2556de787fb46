import itertools

import numpy as np
import pytest

from rescue_planner.cmaes_seq import (
    CmaesParams,
    StrategyConstants,
    decode_keys,
    encode_order,
    improvement_report,
    optimize_sequence,
    tour_cost,
)
from rescue_planner.env_model import Point
from rescue_planner.errors import PreconditionError

BASE = Point(0, 0)
FAST = CmaesParams(max_generations=80, stagnation_window=20, restarts=1, seed=3)


def _points(seed, n, spread=3000.0):
    rng = np.random.default_rng(seed)
    return [Point(x, y) for x, y in rng.uniform(-spread, spread, size=(n, 2))]


def test_decode_by_inspection():
    assert decode_keys([0.3, 0.1, 0.2]) == (1, 2, 0)


def test_decode_sorted_and_tied_keys_give_identity():
    assert decode_keys([0.1, 0.2, 0.5, 0.9]) == (0, 1, 2, 3)
    assert decode_keys([0.4] * 5) == (0, 1, 2, 3, 4)


def test_decode_rejects_nan():
    with pytest.raises(ValueError):
        decode_keys([0.1, float("nan")])


def test_encode_order_inverts_decode():
    order = (3, 0, 4, 1, 2)
    assert decode_keys(encode_order(order)) == order


def test_tour_cost_out_and_back():
    assert tour_cost([0], [Point(0, 5000)], BASE) == pytest.approx(10_000.0)
    assert tour_cost([], [], BASE) == 0.0


def test_tour_cost_symmetric_under_reversal():
    pts = _points(1, 6)
    order = [4, 1, 5, 0, 3, 2]
    assert tour_cost(order, pts, BASE) == pytest.approx(tour_cost(order[::-1], pts, BASE), rel=1e-12)


def test_empty_and_single_sequences_are_trivial():
    empty = optimize_sequence([], BASE, FAST)
    assert empty.order == () and empty.cost == 0.0
    one = optimize_sequence([Point(100, 0)], BASE, FAST)
    assert one.order == (0,)
    assert one.cost == pytest.approx(200.0)
    assert one.metadata["stop"] == "trivial"


def test_two_tasks_optimal():
    pts = [Point(1000, 0), Point(0, 2000)]
    result = optimize_sequence(pts, BASE, FAST)
    assert sorted(result.order) == [0, 1]
    assert result.cost == pytest.approx(tour_cost([0, 1], pts, BASE))


def test_never_worse_than_incumbent():
    pts = _points(5, 7)
    incumbent = (6, 2, 0, 5, 1, 4, 3)
    result = optimize_sequence(pts, BASE, FAST, incumbent=incumbent)
    assert result.cost <= tour_cost(incumbent, pts, BASE)
    assert result.cost == pytest.approx(tour_cost(result.order, pts, BASE))
    costs = [c for _, c in result.history]
    assert all(b <= a for a, b in zip(costs, costs[1:]))


def test_small_instance_reaches_brute_force_optimum():
    pts = _points(8, 5)
    brute = min(tour_cost(p, pts, BASE) for p in itertools.permutations(range(5)))
    result = optimize_sequence(pts, BASE, CmaesParams(seed=1))
    assert result.cost >= brute - 1e-9
    assert result.cost <= 1.02 * brute


def test_covariance_stays_symmetric_positive_definite():
    seen = []

    def check(state):
        c = state.covariance
        seen.append(state.generation)
        assert np.allclose(c, c.T)
        assert np.linalg.eigvalsh(c).min() > 0

    optimize_sequence(_points(2, 8), BASE, FAST, on_generation=check)
    assert seen


def test_seeded_runs_repeat():
    pts = _points(4, 6)
    a = optimize_sequence(pts, BASE, FAST)
    b = optimize_sequence(pts, BASE, FAST)
    assert a.order == b.order and a.history == b.history


def test_metadata_records_strategy_constants():
    result = optimize_sequence(_points(6, 6), BASE, FAST)
    for key in ("generations", "evaluations", "eigen_repairs", "c1", "cmu", "cc", "cs", "damps", "mueff"):
        assert key in result.metadata
    assert result.metadata["stop"] in ("stagnation", "max_generations")


def test_default_population_size():
    assert CmaesParams().population_for(7) == (4 + 5, 4)
    k = StrategyConstants.for_dimension(7, 9, 4)
    assert sum(k.weights) == pytest.approx(1.0)
    assert all(a > b for a, b in zip(k.weights, k.weights[1:]))


def test_non_finite_objective_is_error():
    pts = [Point(0, 100), Point(100, 0), Point(50, 50)]
    with pytest.raises(PreconditionError):
        optimize_sequence(pts, BASE, FAST, cost_fn=lambda order: float("inf"))


def test_improvement_report():
    assert improvement_report(61.2, 48.8) == pytest.approx(0.2026, abs=1e-4)
    assert improvement_report(100.0, 84.9) == pytest.approx(0.151)
    assert improvement_report(42.0, 42.0) == 0.0
    with pytest.raises(ValueError):
        improvement_report(0.0, 0.0)


def test_params_lambda_round_trip_name():
    p = CmaesParams.from_dict({"lambda": 12, "mu": 6})
    assert p.lam == 12
    assert p.to_dict()["lambda"] == 12
    with pytest.raises(ValueError):
        CmaesParams(lam=4, mu=5)


@pytest.mark.parametrize("scale, shift", [(0.5, 0.0), (3.0, -7.25), (1e3, 42.0), (1.0, 1e-3)])
def test_decode_ignores_positive_affine_maps(scale, shift):
    rng = np.random.default_rng(31)
    for _ in range(50):
        keys = rng.random(12)
        assert tuple(decode_keys(scale * keys + shift)) == tuple(decode_keys(keys))
