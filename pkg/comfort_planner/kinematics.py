"""
Segment kinematics of a spatiotemporal plan (waypoints + speeds)
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from .config import settings
from .errors import KinematicsError
from .road import Stations

logger = logging.getLogger(__name__)

PLAN_COLUMNS = ["s", "X", "Y", "y", "v", "a_x", "a_y", "kappa", "dt", "t"]


@dataclass
class MotionPlan:
    """Lateral offsets and speeds at a sequence of stations.

    heading0 is the heading the vehicle arrives with at the first waypoint;
    when omitted the first station tangent is used.
    """
    stations: Stations
    y: np.ndarray
    v: np.ndarray
    heading0: Optional[np.ndarray] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.v = np.asarray(self.v, dtype=float)

    @property
    def size(self) -> int:
        return len(self.y)

    @property
    def initial_heading(self) -> np.ndarray:
        if self.heading0 is None:
            return self.stations.tangent[0]
        return np.asarray(self.heading0, dtype=float)

    def waypoints(self) -> np.ndarray:
        return self.stations.offset(self.y)

    def decision_vector(self) -> np.ndarray:
        return np.concatenate((self.y, self.v))

    def with_decision_vector(self, x: np.ndarray) -> "MotionPlan":
        n = self.size
        return MotionPlan(self.stations, x[:n].copy(), x[n:].copy(), self.heading0)


@dataclass
class SegmentKinematics:
    """Per-segment quantities; entry k belongs to the segment from waypoint k to k + 1"""
    chord: np.ndarray     # h_k, waypoint difference vectors
    d: np.ndarray
    heading: np.ndarray   # unit chord directions
    dpsi: np.ndarray      # signed heading change entering segment k
    kappa: np.ndarray
    v_mean: np.ndarray
    a_x: np.ndarray
    a_y: np.ndarray
    dt: np.ndarray

    def __len__(self) -> int:
        return len(self.d)

    @property
    def travel_time(self) -> float:
        return float(np.sum(self.dt))


def evaluate_kinematics(plan: MotionPlan) -> SegmentKinematics:
    """Distances, accelerations, curvature and step times of every segment"""
    y, v = plan.y, plan.v
    if plan.size < 3 or len(v) != plan.size or len(plan.stations) != plan.size:
        raise KinematicsError(f"plan needs at least 3 matching waypoints, got {plan.size}")
    if np.any(v <= 0.0):
        raise KinematicsError(f"nonpositive speed at waypoint {int(np.argmax(v <= 0.0))}")

    chord = np.diff(plan.waypoints(), axis=0)
    d = np.hypot(chord[:, 0], chord[:, 1])
    degenerate = d <= settings.DEGENERATE_SEGMENT_EPS
    if np.any(degenerate):
        raise KinematicsError(f"degenerate segment {int(np.argmax(degenerate))}")

    v_mean = 0.5 * (v[:-1] + v[1:])
    a_x = (v[1:] ** 2 - v[:-1] ** 2) / (2.0 * d)
    dt = d / v_mean

    previous = np.vstack((plan.initial_heading, chord[:-1]))
    cross = previous[:, 0] * chord[:, 1] - previous[:, 1] * chord[:, 0]
    dot = np.einsum("ij,ij->i", previous, chord)
    dpsi = np.arctan2(cross, dot)
    kappa = dpsi / d
    a_y = v_mean ** 2 * kappa

    return SegmentKinematics(
        chord=chord, d=d, heading=chord / d[:, None], dpsi=dpsi, kappa=kappa,
        v_mean=v_mean, a_x=a_x, a_y=a_y, dt=dt,
    )


def travel_time(plan: MotionPlan) -> float:
    """T = sum of 2 d_k / (v_k + v_k+1)"""
    return evaluate_kinematics(plan).travel_time


def kinematics_vjp(
    plan: MotionPlan,
    kin: SegmentKinematics,
    grad_ax: np.ndarray,
    grad_ay: np.ndarray,
    grad_dt: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Pull gradients w.r.t. (a_x, a_y, dt) back onto (y, v)"""
    v = plan.v
    d, v_mean, a_x, a_y, dt = kin.d, kin.v_mean, kin.a_x, kin.a_y, kin.dt
    chord = kin.chord

    grad_d = -grad_ax * a_x / d + grad_dt / v_mean - grad_ay * a_y / d
    grad_dpsi = grad_ay * v_mean ** 2 / d
    grad_vmean = -grad_dt * dt / v_mean + 2.0 * grad_ay * a_y / v_mean

    grad_v = np.zeros_like(v)
    grad_v[:-1] += -grad_ax * v[:-1] / d + 0.5 * grad_vmean
    grad_v[1:] += grad_ax * v[1:] / d + 0.5 * grad_vmean

    # dpsi_k = angle(h_k) - angle(h_k-1); heading0 is fixed
    d2 = d ** 2
    grad_chord = grad_d[:, None] * chord / d[:, None]
    grad_chord += (grad_dpsi / d2)[:, None] * np.column_stack((-chord[:, 1], chord[:, 0]))
    grad_chord[:-1] += (grad_dpsi[1:] / d2[:-1])[:, None] * np.column_stack((chord[:-1, 1], -chord[:-1, 0]))

    grad_points = np.zeros((plan.size, 2))
    grad_points[1:] += grad_chord
    grad_points[:-1] -= grad_chord
    grad_y = np.einsum("ij,ij->i", grad_points, plan.stations.normal)
    return grad_y, grad_v


def plan_table(plan: MotionPlan, kin: Optional[SegmentKinematics] = None) -> pd.DataFrame:
    """Tabular plan dump; segment columns of the last waypoint are empty"""
    kin = kin or evaluate_kinematics(plan)
    points = plan.waypoints()

    def pad(values: np.ndarray) -> np.ndarray:
        return np.append(values, np.nan)

    return pd.DataFrame({
        "s": plan.stations.s,
        "X": points[:, 0],
        "Y": points[:, 1],
        "y": plan.y,
        "v": plan.v,
        "a_x": pad(kin.a_x),
        "a_y": pad(kin.a_y),
        "kappa": pad(kin.kappa),
        "dt": pad(kin.dt),
        "t": np.concatenate(([0.0], np.cumsum(kin.dt))),
    }, columns=PLAN_COLUMNS)
