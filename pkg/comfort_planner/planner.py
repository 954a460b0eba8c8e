"""
Integral and receding-horizon planners built on the inner solver
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.ndimage import uniform_filter1d

from .config import settings
from .errors import ComfortPlannerError, SolverError
from .kinematics import MotionPlan, evaluate_kinematics
from .models import PlanMetrics, PlannerConfig, PlannerMode, RoadProfile, StepTiming
from .objective import ObjectiveFunction, cost, metrics, weightings_for
from .road import END_TOLERANCE, RoadGeometry, Stations
from .solver import inner_solve

logger = logging.getLogger(__name__)


@dataclass
class SolveReport:
    """Result of one planner run"""
    plan: MotionPlan
    cost: float
    iterations: int
    solve_time: float
    converged: bool
    config: PlannerConfig
    metrics: Optional[PlanMetrics] = None
    timings: List[StepTiming] = field(default_factory=list)

    @property
    def travel_time(self) -> float:
        return self.metrics.travel_time if self.metrics else evaluate_kinematics(self.plan).travel_time

    @property
    def flagged_steps(self) -> List[int]:
        return [t.step_index for t in self.timings if t.flagged]


@dataclass
class InitialState:
    """Pose of the vehicle when receding-horizon planning starts"""
    s: float = 0.0
    y: float = 0.0
    v: Optional[float] = None


def _box_bounds(road: RoadProfile, geometry: RoadGeometry, stations: Stations) -> Tuple[np.ndarray, np.ndarray]:
    n = len(stations)
    v_low, v_high = geometry.speed_bounds(stations.s)
    lower = np.concatenate((np.full(n, road.y_min), v_low))
    upper = np.concatenate((np.full(n, road.y_max), v_high))
    return lower, upper


def _pin(lower: np.ndarray, upper: np.ndarray, index: int, value: float, label: str) -> None:
    if not lower[index] - 1e-12 <= value <= upper[index] + 1e-12:
        raise SolverError(f"infeasible bounds: {label} {value:.3f} outside [{lower[index]:.3f}, {upper[index]:.3f}]")
    lower[index] = upper[index] = value


def initial_guess(stations: Stations, lower: np.ndarray, upper: np.ndarray, config: PlannerConfig) -> np.ndarray:
    """Lane centre at the smoothed speed limit, optionally jittered"""
    n = len(stations)
    v = uniform_filter1d(upper[n:], size=config.init_smoothing, mode="nearest")
    if config.init_jitter > 0.0:
        rng = np.random.default_rng(config.seed)
        v = v + rng.normal(0.0, config.init_jitter, size=n)
    return np.clip(np.concatenate((np.zeros(n), v)), lower, upper)


def _hold_plan(y: float, v: float, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Horizon plan keeping the current offset and speed, projected onto the box"""
    n = len(lower) // 2
    return np.clip(np.concatenate((np.full(n, y), np.full(n, v))), lower, upper)


def solve_integral(road: RoadProfile, config: PlannerConfig,
                   warm_start: Optional[MotionPlan] = None) -> SolveReport:
    """Whole-route optimisation with pinned boundary waypoints"""
    geometry = RoadGeometry(road)
    stations = geometry.build_stations()
    n = len(stations)
    lower, upper = _box_bounds(road, geometry, stations)
    _pin(lower, upper, 0, 0.0, "initial offset")
    _pin(lower, upper, n - 1, 0.0, "final offset")
    _pin(lower, upper, n, road.entry_speed, "entry speed")
    _pin(lower, upper, 2 * n - 1, road.exit_speed, "exit speed")

    if warm_start is not None and warm_start.size == n:
        x0 = np.clip(warm_start.decision_vector(), lower, upper)
    else:
        x0 = initial_guess(stations, lower, upper, config)

    heading0 = stations.tangent[0]
    objective_fn = ObjectiveFunction(stations, config.objective, heading0=heading0)
    logger.info(f"Integral solve: {config.objective.kind.value}, W={config.objective.weight:g}, {n} stations")

    started = time.perf_counter()
    result = inner_solve(objective_fn, x0, (lower, upper), config.solver)
    elapsed = time.perf_counter() - started

    plan = MotionPlan(stations, result.x[:n], result.x[n:], heading0)
    report = SolveReport(
        plan=plan,
        cost=cost(plan, config.objective),
        iterations=result.iterations,
        solve_time=elapsed,
        converged=result.converged,
        config=config,
        metrics=metrics(plan, config.objective),
    )
    if not report.converged:
        logger.warning(f"Integral solve did not converge after {result.iterations} iterations: {result.message}")
    logger.info(f"Integral solve finished: T={report.travel_time:.2f} s, J={report.cost:.4f}, {elapsed:.2f} s")
    return report


def horizon_arclengths(s_current: float, spacing: float, horizon: int, route_length: float) -> np.ndarray:
    """Current station plus the horizon ahead.

    A horizon reaching the route end is cut there; at least three stations
    are kept by padding past the end.
    """
    full = s_current + spacing * np.arange(1, horizon + 1)
    ahead = full[full < route_length - 0.5 * spacing]
    if len(ahead) < len(full):
        ahead = np.append(ahead, route_length)
    s = np.concatenate(([s_current], ahead))
    while len(s) < 3:
        s = np.append(s, s[-1] + spacing)
    return s


def solve_receding_horizon(road: RoadProfile, config: PlannerConfig,
                           initial_state: Optional[InitialState] = None) -> SolveReport:
    """Repeated short-horizon solves committing one waypoint per solve"""
    geometry = RoadGeometry(road)
    length = geometry.length
    state = initial_state or InitialState()
    preview = config.preview
    spec = config.objective
    longitudinal, lateral = weightings_for(spec)

    v_current = state.v if state.v is not None else road.entry_speed
    s_current, y_current = state.s, state.y
    if v_current <= 0.0:
        raise SolverError("initial speed must be positive")
    committed_s, committed_y, committed_v = [s_current], [y_current], [v_current]
    carry_in = (longitudinal.zero_state(), lateral.zero_state())
    heading = geometry.stations_at([s_current]).tangent[0]
    previous: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None
    timings: List[StepTiming] = []
    total_iterations = 0

    logger.info(
        f"Receding-horizon solve: {spec.kind.value}, W={spec.weight:g}, "
        f"T_p={preview.preview_time:g} s, N_p={preview.horizon}"
    )
    started = time.perf_counter()
    step_index = 0
    while s_current < length - END_TOLERANCE:
        spacing = v_current * preview.sampling_time
        s_h = horizon_arclengths(s_current, spacing, preview.horizon, length)
        stations = geometry.stations_at(s_h)
        n = len(stations)

        lower, upper = _box_bounds(road, geometry, stations)
        at_end = s_h >= length - END_TOLERANCE
        lower[:n][at_end] = upper[:n][at_end] = 0.0
        lower[n:][at_end] = upper[n:][at_end] = road.exit_speed
        lower[0] = upper[0] = y_current
        lower[n] = upper[n] = v_current

        if config.warm_start and previous is not None:
            s_prev, y_prev, v_prev = previous
            x0 = np.concatenate((np.interp(s_h, s_prev, y_prev), np.interp(s_h, s_prev, v_prev)))
            x0 = np.clip(x0, lower, upper)
        else:
            x0 = initial_guess(stations, lower, upper, config)

        objective_fn = ObjectiveFunction(stations, spec, heading0=heading, carry_in=carry_in)
        step_started = time.perf_counter()
        try:
            result = inner_solve(objective_fn, x0, (lower, upper), config.solver)
            x, iterations, flagged = result.x, result.iterations, not result.converged
        except SolverError as e:
            logger.warning(f"Horizon solve failed at step {step_index}, reusing the shifted plan: {str(e)}")
            x, iterations, flagged = x0, 0, True
        solve_ms = 1e3 * (time.perf_counter() - step_started)
        total_iterations += iterations

        timings.append(StepTiming(
            step_index=step_index,
            horizon=preview.horizon,
            preview_time=preview.preview_time,
            sampling_time=preview.sampling_time,
            objective_kind=spec.kind,
            solve_ms=solve_ms,
            iterations=iterations,
            flagged=flagged,
        ))

        # Commit the first segment and carry the filter states through it
        try:
            kin = evaluate_kinematics(MotionPlan(stations, x[:n], x[n:], heading))
        except ComfortPlannerError as e:
            logger.warning(f"Horizon plan at step {step_index} cannot be evaluated, holding speed and offset: {str(e)}")
            x = _hold_plan(y_current, v_current, lower, upper)
            kin = evaluate_kinematics(MotionPlan(stations, x[:n], x[n:], heading))
            timings[-1].flagged = True
        carry_in = (
            longitudinal.advance(kin.a_x[:1], kin.dt[:1], carry_in[0]),
            lateral.advance(kin.a_y[:1], kin.dt[:1], carry_in[1]),
        )
        heading = kin.heading[0]
        s_current, y_current, v_current = float(s_h[1]), float(x[1]), float(x[n + 1])
        committed_s.append(s_current)
        committed_y.append(y_current)
        committed_v.append(v_current)
        previous = (s_h, x[:n], x[n:])
        step_index += 1

    elapsed = time.perf_counter() - started
    committed = geometry.stations_at(np.array(committed_s))
    plan = MotionPlan(committed, np.array(committed_y), np.array(committed_v), committed.tangent[0])
    report = SolveReport(
        plan=plan,
        cost=cost(plan, spec),
        iterations=total_iterations,
        solve_time=elapsed,
        converged=not any(t.flagged for t in timings),
        config=config,
        metrics=metrics(plan, spec),
        timings=timings,
    )
    if report.flagged_steps:
        logger.warning(f"{len(report.flagged_steps)} of {len(timings)} horizon solves flagged")
    logger.info(f"Receding-horizon solve finished: {len(timings)} steps, T={report.travel_time:.2f} s, {elapsed:.2f} s")
    return report


def solve(road: RoadProfile, config: PlannerConfig, warm_start: Optional[MotionPlan] = None) -> SolveReport:
    """Dispatch on the planner mode"""
    if config.mode == PlannerMode.RECEDING_HORIZON:
        return solve_receding_horizon(road, config)
    return solve_integral(road, config, warm_start)


def match_travel_time(
    solve_at: Callable[[float, Optional[MotionPlan]], SolveReport],
    target: float,
    tolerance: float = None,
    w_min: float = None,
    w_max: float = None,
    max_iterations: int = None,
) -> Tuple[float, SolveReport]:
    """Bisect W in log space until the travel time is within tolerance of target.

    Travel time decreases as W grows. Each solve is warm-started from the
    previous plan. Returns the closest solve when the target is not bracketed
    or the iteration cap is hit.
    """
    tolerance = tolerance or settings.MATCH_TOLERANCE
    low = w_min or settings.W_SEARCH_MIN
    high = w_max or settings.W_SEARCH_MAX
    max_iterations = max_iterations or settings.MATCH_MAX_ITERATIONS

    slow = solve_at(low, None)
    if abs(slow.travel_time - target) <= tolerance:
        return low, slow
    fast = solve_at(high, slow.plan)
    if abs(fast.travel_time - target) <= tolerance:
        return high, fast

    best_weight, best = min(((low, slow), (high, fast)), key=lambda item: abs(item[1].travel_time - target))
    if not fast.travel_time <= target <= slow.travel_time:
        logger.warning(
            f"Target T={target:g} s outside [{fast.travel_time:.2f}, {slow.travel_time:.2f}] s for "
            f"W in [{low:g}, {high:g}]"
        )
        return best_weight, best

    warm = slow.plan
    for iteration in range(max_iterations):
        weight = math.sqrt(low * high)
        report = solve_at(weight, warm)
        warm = report.plan
        error = report.travel_time - target
        logger.debug(f"Travel-time match {iteration}: W={weight:.5g}, T={report.travel_time:.3f} s")
        if abs(error) < abs(best.travel_time - target):
            best_weight, best = weight, report
        if abs(error) <= tolerance:
            return weight, report
        if error > 0:
            low = weight
        else:
            high = weight

    logger.warning(f"Travel-time match stopped at T={best.travel_time:.2f} s (target {target:g} s)")
    return best_weight, best
