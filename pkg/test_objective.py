"""
Tests for the comfort objectives, their gradients and plan metrics
"""

import numpy as np
import pytest
from scipy.linalg import expm

from comfort_planner.kinematics import MotionPlan, evaluate_kinematics
from comfort_planner.models import Axis, ObjectiveKind, ObjectiveSpec, default_filter
from comfort_planner.objective import (
    ObjectiveFunction, cost, cost_ma, cost_ms, finite_difference_gradient, metrics, metrics_from_sequence,
)
from comfort_planner.road import RoadGeometry, build_stations
from comfort_planner.weighting import make_filter


def random_plan(stations, rng, y_span=0.8, v_range=(6.0, 14.0)) -> MotionPlan:
    n = len(stations)
    return MotionPlan(stations, rng.uniform(-y_span, y_span, n), rng.uniform(*v_range, n))


def oracle_weighted_energy(u: np.ndarray, dt: np.ndarray, axis: Axis) -> float:
    """Motion plus tail energy with every step taken through a Van Loan exponential"""
    trans = make_filter(default_filter(axis))[1]
    augmented = np.zeros((3, 3))
    augmented[:2, :2] = trans.A
    augmented[:2, 2] = trans.B
    x = np.zeros(2)
    energy = 0.0
    for u_k, dt_k in zip(u, dt):
        block = expm(augmented * dt_k)
        x = block[:2, :2] @ x + block[:2, 2] * u_k
        energy += float(trans.C @ x) ** 2 * dt_k
    free = expm(trans.A * 0.2)
    for _ in range(150):
        x = free @ x
        energy += 0.2 * float(trans.C @ x) ** 2
    return energy


def test_constant_speed_straight_cost(straight_road):
    """Test both objectives reduce to W L / v without acceleration"""
    stations = build_stations(straight_road)
    n = len(stations)
    plan = MotionPlan(stations, np.zeros(n), np.full(n, 10.0))
    for kind in ObjectiveKind:
        spec = ObjectiveSpec(kind=kind, weight=2.0)
        assert cost(plan, spec) == pytest.approx(20.0, abs=1e-12)


def test_zero_weight_is_pure_comfort(quarter_turn_road, rng):
    """Test W = 0 leaves only the comfort term"""
    plan = random_plan(build_stations(quarter_turn_road), rng)
    spec = ObjectiveSpec(kind=ObjectiveKind.MS, weight=0.0)
    assert cost(plan, spec) == pytest.approx(metrics(plan, spec).d_ms, rel=1e-12)


def test_raw_energy_example():
    """Test 2 m/s^2 held for one second gives D_MA = 4"""
    result = metrics_from_sequence(
        np.array([2.0, 0.0]), np.array([0.0, 0.0]), np.array([1.0, 1.0]),
        default_filter(Axis.LONGITUDINAL), default_filter(Axis.LATERAL),
    )
    assert result.d_ma == pytest.approx(4.0)
    assert result.d_ma_longitudinal == pytest.approx(4.0)
    assert result.d_ma_lateral == 0.0
    assert result.travel_time == pytest.approx(2.0)


def test_cost_ma_matches_direct_sum(quarter_turn_road, rng):
    """Test D_MA + W T against the segment sum"""
    plan = random_plan(build_stations(quarter_turn_road), rng)
    kin = evaluate_kinematics(plan)
    spec = ObjectiveSpec(kind=ObjectiveKind.MA, weight=1.5)
    expected = np.sum((kin.a_x ** 2 + kin.a_y ** 2) * kin.dt) + 1.5 * kin.travel_time
    assert cost_ma(plan, spec) == pytest.approx(expected, rel=1e-12)


def test_zero_acceleration_metrics(straight_road):
    """Test a constant-speed straight plan scores zero everywhere"""
    stations = build_stations(straight_road)
    n = len(stations)
    result = metrics(MotionPlan(stations, np.zeros(n), np.full(n, 10.0)), ObjectiveSpec())
    assert result.d_ms == result.d_ma == result.squared_msdv == 0.0
    assert result.peak_ax == result.peak_ay == result.peak_combined == 0.0
    assert result.travel_time == pytest.approx(10.0)


def test_peak_combined_without_longitudinal(quarter_turn_road):
    """Test the combined peak equals the lateral peak at constant speed"""
    stations = build_stations(quarter_turn_road)
    n = len(stations)
    result = metrics(MotionPlan(stations, np.zeros(n), np.full(n, 10.0)), ObjectiveSpec())
    assert result.peak_ax == 0.0
    assert result.peak_combined == pytest.approx(result.peak_ay)
    assert result.peak_ay == pytest.approx(2.0, rel=1e-2)


def test_ms_cost_bounded_below_by_time_term(quarter_turn_road, rng):
    """Test J_MS is never below W T"""
    stations = build_stations(quarter_turn_road)
    spec = ObjectiveSpec(kind=ObjectiveKind.MS, weight=3.0)
    for _ in range(5):
        plan = random_plan(stations, rng)
        assert cost_ms(plan, spec) >= 3.0 * evaluate_kinematics(plan).travel_time


def test_ms_cost_matches_independent_oracle(quarter_turn_road, rng):
    """Test D_MS end to end against per-step matrix exponentials"""
    plan = random_plan(build_stations(quarter_turn_road), rng)
    kin = evaluate_kinematics(plan)
    spec = ObjectiveSpec(kind=ObjectiveKind.MS, weight=0.7)
    expected = (
        oracle_weighted_energy(kin.a_x, kin.dt, Axis.LONGITUDINAL)
        + oracle_weighted_energy(kin.a_y, kin.dt, Axis.LATERAL)
        + 0.7 * kin.travel_time
    )
    assert cost_ms(plan, spec) == pytest.approx(expected, rel=1e-9)


def test_metrics_squared_msdv_equals_d_ms(quarter_turn_road, rng):
    """Test the squared MSDV reported is the weighted energy with tail"""
    plan = random_plan(build_stations(quarter_turn_road), rng)
    result = metrics(plan, ObjectiveSpec())
    assert result.squared_msdv == result.d_ms
    assert result.d_ms == pytest.approx(result.d_ms_longitudinal + result.d_ms_lateral)
    assert result.d_ma == pytest.approx(result.d_ma_longitudinal + result.d_ma_lateral)


def _check_gradient(objective_fn: ObjectiveFunction, x: np.ndarray) -> None:
    value, grad = objective_fn(x)
    assert value == pytest.approx(objective_fn.value(x), rel=1e-12)
    expected = finite_difference_gradient(lambda point: objective_fn(point)[0], x)
    scale = max(1.0, float(np.max(np.abs(expected))))
    np.testing.assert_allclose(grad, expected, rtol=1e-5, atol=1e-6 * scale)


@pytest.mark.parametrize("kind", list(ObjectiveKind))
def test_gradient_on_bundled_route(bundled_road, kind):
    """Test objective gradients against central differences on the bundled route"""
    stations = build_stations(bundled_road)
    rng = np.random.default_rng(7)
    objective_fn = ObjectiveFunction(stations, ObjectiveSpec(kind=kind, weight=1.2))
    for _ in range(3):
        _check_gradient(objective_fn, random_plan(stations, rng, v_range=(5.0, 13.0)).decision_vector())


def test_gradient_with_carry_in(quarter_turn_road, rng):
    """Test gradients from a nonzero filter state and a fixed arrival heading"""
    stations = RoadGeometry(quarter_turn_road).stations_at(np.linspace(30.0, 110.0, 17))
    objective_fn = ObjectiveFunction(
        stations, ObjectiveSpec(kind=ObjectiveKind.MS, weight=0.5),
        heading0=np.array([np.cos(0.05), np.sin(0.05)]),
        carry_in=(np.array([0.2, -0.01]), np.array([-0.4, 0.03])),
    )
    _check_gradient(objective_fn, random_plan(stations, rng).decision_vector())


def test_evaluation_counter(straight_road):
    """Test every call is counted"""
    stations = build_stations(straight_road)
    objective_fn = ObjectiveFunction(stations, ObjectiveSpec())
    x = np.concatenate((np.zeros(len(stations)), np.full(len(stations), 10.0)))
    objective_fn(x)
    objective_fn(x)
    assert objective_fn.evaluations == 2


@pytest.mark.slow
def test_gradient_many_points(bundled_road):
    """Test MS gradients at many random plans on the bundled route"""
    stations = build_stations(bundled_road)
    rng = np.random.default_rng(2024)
    objective_fn = ObjectiveFunction(stations, ObjectiveSpec(kind=ObjectiveKind.MS, weight=1.0))
    for _ in range(100):
        _check_gradient(objective_fn, random_plan(stations, rng, v_range=(2.0, 14.0)).decision_vector())
