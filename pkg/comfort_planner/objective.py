"""
Comfort / travel-time objectives J = D + W T and trajectory metrics
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import ComfortPlannerError
from .kinematics import MotionPlan, evaluate_kinematics, kinematics_vjp
from .models import FilterSpec, ObjectiveKind, ObjectiveSpec, PlanMetrics
from .road import Stations
from .weighting import BandPassWeighting, IdentityWeighting, Weighting, weighted_energy

logger = logging.getLogger(__name__)

CarryIn = Tuple[Optional[np.ndarray], Optional[np.ndarray]]


def weightings_for(spec: ObjectiveSpec) -> Tuple[Weighting, Weighting]:
    """(longitudinal, lateral) weighting of an objective"""
    if spec.kind == ObjectiveKind.MS:
        return BandPassWeighting(spec.longitudinal_filter), BandPassWeighting(spec.lateral_filter)
    return IdentityWeighting(), IdentityWeighting()


@dataclass
class ObjectiveFunction:
    """J(x) and dJ/dx over the decision vector x = [y, v] at fixed stations"""
    stations: Stations
    spec: ObjectiveSpec
    heading0: Optional[np.ndarray] = None
    carry_in: Optional[CarryIn] = None

    def __post_init__(self):
        self.longitudinal, self.lateral = weightings_for(self.spec)
        self.evaluations = 0

    def plan(self, x: np.ndarray) -> MotionPlan:
        n = len(self.stations)
        return MotionPlan(self.stations, x[:n], x[n:], self.heading0)

    def value(self, x: np.ndarray) -> float:
        return cost(self.plan(x), self.spec, self.carry_in, self.heading0)

    def __call__(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        self.evaluations += 1
        plan = self.plan(np.asarray(x, dtype=float))
        kin = evaluate_kinematics(plan)
        x_long, x_lat = self.carry_in or (None, None)

        e_long, grad_ax, dt_long = self.longitudinal.energy_and_gradient(kin.a_x, kin.dt, x_long)
        e_lat, grad_ay, dt_lat = self.lateral.energy_and_gradient(kin.a_y, kin.dt, x_lat)
        weight = self.spec.weight
        value = e_long + e_lat + weight * kin.travel_time

        grad_y, grad_v = kinematics_vjp(plan, kin, grad_ax, grad_ay, dt_long + dt_lat + weight)
        return value, np.concatenate((grad_y, grad_v))


def cost_ms(plan: MotionPlan, spec: ObjectiveSpec, carry_in: Optional[CarryIn] = None) -> float:
    """D_MS (motion + tail) + W T"""
    kin = evaluate_kinematics(plan)
    energy = weighted_energy(
        kin.a_x, kin.a_y, kin.dt,
        BandPassWeighting(spec.longitudinal_filter), BandPassWeighting(spec.lateral_filter),
        carry_in,
    )
    return energy.total + spec.weight * kin.travel_time


def cost_ma(plan: MotionPlan, spec: ObjectiveSpec) -> float:
    """D_MA + W T"""
    kin = evaluate_kinematics(plan)
    energy = weighted_energy(kin.a_x, kin.a_y, kin.dt, IdentityWeighting(), IdentityWeighting())
    return energy.total + spec.weight * kin.travel_time


def cost(plan: MotionPlan, spec: ObjectiveSpec, carry_in: Optional[CarryIn] = None,
         heading0: Optional[np.ndarray] = None) -> float:
    if heading0 is not None and plan.heading0 is None:
        plan = MotionPlan(plan.stations, plan.y, plan.v, heading0)
    if spec.kind == ObjectiveKind.MS:
        return cost_ms(plan, spec, carry_in)
    return cost_ma(plan, spec)


def metrics_from_sequence(
    a_x: np.ndarray,
    a_y: np.ndarray,
    dt: np.ndarray,
    longitudinal_filter: FilterSpec,
    lateral_filter: FilterSpec,
) -> PlanMetrics:
    """Metrics of a per-segment acceleration sequence; shared by plans and drives"""
    a_x = np.asarray(a_x, dtype=float)
    a_y = np.asarray(a_y, dtype=float)
    dt = np.asarray(dt, dtype=float)
    ms = weighted_energy(a_x, a_y, dt, BandPassWeighting(longitudinal_filter), BandPassWeighting(lateral_filter))
    ma = weighted_energy(a_x, a_y, dt, IdentityWeighting(), IdentityWeighting())

    def peak(values: np.ndarray) -> float:
        return float(np.max(np.abs(values))) if len(values) else 0.0

    return PlanMetrics(
        travel_time=float(np.sum(dt)),
        d_ms=ms.total,
        d_ma=ma.total,
        squared_msdv=ms.total,
        peak_ax=peak(a_x),
        peak_ay=peak(a_y),
        peak_combined=peak(np.hypot(a_x, a_y)),
        d_ms_longitudinal=ms.longitudinal.total,
        d_ms_lateral=ms.lateral.total,
        d_ma_longitudinal=ma.longitudinal.total,
        d_ma_lateral=ma.lateral.total,
    )


def metrics(plan: MotionPlan, spec: ObjectiveSpec) -> PlanMetrics:
    """T, D_MS, D_MA, squared MSDV and peak accelerations of a plan"""
    kin = evaluate_kinematics(plan)
    return metrics_from_sequence(kin.a_x, kin.a_y, kin.dt, spec.longitudinal_filter, spec.lateral_filter)


def finite_difference_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray,
                               step: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function"""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for index in range(len(x)):
        h = step * max(1.0, abs(x[index]))
        forward = x.copy()
        backward = x.copy()
        forward[index] += h
        backward[index] -= h
        try:
            grad[index] = (fn(forward) - fn(backward)) / (2.0 * h)
        except ComfortPlannerError as e:
            logger.error(f"Error evaluating finite difference at index {index}: {str(e)}")
            raise
    return grad
