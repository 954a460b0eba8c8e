"""
GPS/IMU drive logs: gap filling, Kalman fusion and comfort scoring
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from filterpy.kalman import KalmanFilter

from .config import settings
from .errors import TelemetryError
from .kinematics import MotionPlan, evaluate_kinematics
from .models import Axis, FilterSpec, PlanMetrics, default_filter
from .objective import metrics_from_sequence

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

LOG_COLUMNS = ["t", "source", "X", "Y", "ax_body", "ay_body", "yaw"]


@dataclass
class TelemetryLog:
    """GPS fixes (t, X, Y) and IMU samples (t, ax_body, ay_body, yaw)"""
    gps: pd.DataFrame
    imu: pd.DataFrame
    gaps: List[Tuple[float, float]] = field(default_factory=list)
    notes: Dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        for name, frame in (("gps", self.gps), ("imu", self.imu)):
            if len(frame) < 2:
                raise TelemetryError(f"{name} stream needs at least 2 samples")
            if np.any(np.diff(frame["t"].to_numpy()) <= 0.0):
                raise TelemetryError(f"{name} timestamps must be strictly increasing")
        if np.any(np.abs(np.diff(self.imu["yaw"].to_numpy())) > np.pi):
            raise TelemetryError("yaw must be unwrapped")
        for start, end in self.gaps:
            if end <= start:
                raise TelemetryError(f"gap ({start}, {end}) must have positive length")


@dataclass
class FusedTrajectory:
    """Uniform-time global trajectory.

    ax/ay at sample k are the global accelerations held from t_k to t_k+1;
    the last entry is unused.
    """
    t: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    yaw: Optional[np.ndarray] = None
    cov_x: Optional[np.ndarray] = None
    cov_y: Optional[np.ndarray] = None
    flagged: Optional[np.ndarray] = None
    gaps: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def speed(self) -> np.ndarray:
        return np.hypot(self.vx, self.vy)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.t, "X": self.X, "Y": self.Y, "v": self.speed,
            "a_x_global": self.ax, "a_y_global": self.ay,
        })


def _gap_mask(t: np.ndarray, gaps: List[Tuple[float, float]]) -> np.ndarray:
    mask = np.zeros(len(t), dtype=bool)
    for start, end in gaps:
        mask |= (t >= start) & (t <= end)
    return mask


def interpolate_gaps(log: TelemetryLog) -> TelemetryLog:
    """Replace GPS fixes inside outages by a straight line between the bracketing valid fixes"""
    gps = log.gps.copy()
    t = gps["t"].to_numpy()
    invalid = _gap_mask(t, log.gaps) | gps[["X", "Y"]].isna().any(axis=1).to_numpy()
    if not invalid.any():
        return TelemetryLog(gps=gps, imu=log.imu, gaps=list(log.gaps), notes=dict(log.notes))
    if invalid[0] or invalid[-1]:
        raise TelemetryError("GPS gap at stream start or end cannot be interpolated")

    valid = ~invalid
    for column in ("X", "Y"):
        values = gps[column].to_numpy(dtype=float)
        values[invalid] = np.interp(t[invalid], t[valid], values[valid])
        gps[column] = values
    logger.info(f"Interpolated {int(invalid.sum())} GPS fixes across {len(log.gaps)} gaps")
    return TelemetryLog(gps=gps, imu=log.imu, gaps=list(log.gaps), notes=dict(log.notes))


def _initial_motion(gps_t: np.ndarray, gps_xy: np.ndarray, t0: float, accel0: np.ndarray,
                    gps_sigma: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Position and velocity at t0 from a line fit over the first GPS second.

    The displacement due to the initial IMU acceleration is removed before fitting.
    """
    window = gps_t <= gps_t[0] + settings.KF_INIT_WINDOW
    if window.sum() < 2:
        window[:2] = True
    times = gps_t[window] - t0
    corrected = gps_xy[window] - 0.5 * times[:, None] ** 2 * accel0[None, :]
    slope, intercept = np.polyfit(times, corrected, 1)
    spread = float(np.sum((times - times.mean()) ** 2))
    return intercept, slope, gps_sigma ** 2 / spread


def _axis_filter(position: float, velocity: float, velocity_var: float, gps_sigma: float) -> KalmanFilter:
    kf = KalmanFilter(dim_x=2, dim_z=1, dim_u=1)
    kf.x = np.array([[position], [velocity]])
    kf.H = np.array([[1.0, 0.0]])
    kf.R = np.array([[gps_sigma ** 2]])
    kf.P = np.diag([gps_sigma ** 2, velocity_var])
    return kf


def _set_step(kf: KalmanFilter, dt: float, process_noise: float) -> None:
    kf.F = np.array([[1.0, dt], [0.0, 1.0]])
    kf.B = np.array([[0.5 * dt ** 2], [dt]])
    kf.Q = process_noise ** 2 * np.array([
        [dt ** 4 / 4.0, dt ** 3 / 2.0],
        [dt ** 3 / 2.0, dt ** 2],
    ])


def _check_covariance(kf: KalmanFilter) -> bool:
    """Symmetrise P; True when it is not positive semidefinite"""
    kf.P = 0.5 * (kf.P + kf.P.T)
    if np.min(np.linalg.eigvalsh(kf.P)) < -1e-12:
        eigenvalues, vectors = np.linalg.eigh(kf.P)
        kf.P = vectors @ np.diag(np.clip(eigenvalues, 0.0, None)) @ vectors.T
        return True
    return False


def fuse(log: TelemetryLog, process_noise: float = None, gps_sigma: float = None) -> FusedTrajectory:
    """Two 1-D kinematic Kalman filters (X and Y), IMU as input and GPS as measurement"""
    process_noise = settings.KF_PROCESS_NOISE if process_noise is None else process_noise
    gps_sigma = settings.KF_GPS_SIGMA if gps_sigma is None else gps_sigma
    log.validate()

    gps_t = log.gps["t"].to_numpy(dtype=float)
    gps_xy = log.gps[["X", "Y"]].to_numpy(dtype=float)
    if np.isnan(gps_xy).any():
        raise TelemetryError("GPS stream has invalid fixes; interpolate gaps first")
    t = log.imu["t"].to_numpy(dtype=float)
    if gps_t[0] > t[-1] or gps_t[-1] < t[0]:
        raise TelemetryError("GPS and IMU streams do not overlap in time")

    yaw = log.imu["yaw"].to_numpy(dtype=float)
    ax_body = log.imu["ax_body"].to_numpy(dtype=float)
    ay_body = log.imu["ay_body"].to_numpy(dtype=float)
    accel = np.column_stack((
        np.cos(yaw) * ax_body - np.sin(yaw) * ay_body,
        np.sin(yaw) * ax_body + np.cos(yaw) * ay_body,
    ))

    # GPS fixes land on the nearest IMU sample within half a step
    index = np.clip(np.searchsorted(t, gps_t), 1, len(t) - 1)
    nearest = np.where(np.abs(t[index - 1] - gps_t) <= np.abs(t[index] - gps_t), index - 1, index)
    half_step = 0.5 * np.diff(t).max()
    fixes = {int(k): gps_xy[j] for j, k in enumerate(nearest) if abs(t[k] - gps_t[j]) <= half_step}

    start, velocity, velocity_var = _initial_motion(gps_t, gps_xy, t[0], accel[0], gps_sigma)
    filters = [
        _axis_filter(start[axis], velocity[axis], velocity_var, gps_sigma) for axis in range(2)
    ]

    count = len(t)
    states = np.zeros((count, 2, 2))
    covariances = np.zeros((count, 2, 2, 2))
    flagged = np.zeros(count, dtype=bool)
    for k in range(count):
        for axis, kf in enumerate(filters):
            if k > 0:
                _set_step(kf, t[k] - t[k - 1], process_noise)
                kf.predict(u=np.array([[accel[k - 1, axis]]]))
            if k in fixes:
                kf.update(np.array([[fixes[k][axis]]]))
            flagged[k] |= _check_covariance(kf)
            states[k, axis] = kf.x[:, 0]
            covariances[k, axis] = kf.P
    if flagged.any():
        logger.warning(f"Covariance repaired at {int(flagged.sum())} fusion steps")

    vx, vy = states[:, 0, 1], states[:, 1, 1]
    dt = np.diff(t)
    ax = np.append(np.diff(vx) / dt, 0.0)
    ay = np.append(np.diff(vy) / dt, 0.0)
    logger.info(f"Fused {count} samples over {t[-1] - t[0]:.1f} s with {len(fixes)} GPS fixes")
    return FusedTrajectory(
        t=t, X=states[:, 0, 0], Y=states[:, 1, 0], vx=vx, vy=vy, ax=ax, ay=ay, yaw=yaw,
        cov_x=covariances[:, 0], cov_y=covariances[:, 1], flagged=flagged, gaps=list(log.gaps),
    )


def vehicle_frame_sequence(traj: FusedTrajectory) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-segment (a_long, a_lat, dt); the frame follows the velocity at each segment start"""
    dt = np.diff(traj.t)
    vx, vy = traj.vx[:-1], traj.vy[:-1]
    speed = np.hypot(vx, vy)
    slow = speed < settings.LOW_SPEED_THRESHOLD
    if slow.any() and traj.yaw is None:
        raise TelemetryError("speed below threshold and no yaw channel to fall back on")

    heading = np.column_stack((vx, vy)) / np.where(slow, 1.0, speed)[:, None]
    if slow.any():
        yaw = traj.yaw[:-1][slow]
        heading[slow] = np.column_stack((np.cos(yaw), np.sin(yaw)))

    ax, ay = traj.ax[:-1], traj.ay[:-1]
    a_long = heading[:, 0] * ax + heading[:, 1] * ay
    a_lat = heading[:, 0] * ay - heading[:, 1] * ax
    return a_long, a_lat, dt


def score_drive(traj: FusedTrajectory, longitudinal_filter: FilterSpec = None,
                lateral_filter: FilterSpec = None) -> PlanMetrics:
    """Comfort metrics of a trajectory through the planner's scoring path"""
    a_long, a_lat, dt = vehicle_frame_sequence(traj)
    return metrics_from_sequence(
        a_long, a_lat, dt,
        longitudinal_filter or default_filter(Axis.LONGITUDINAL),
        lateral_filter or default_filter(Axis.LATERAL),
    )


def trajectory_from_plan(plan: MotionPlan) -> FusedTrajectory:
    """Plan waypoints as trajectory samples with the segment accelerations held"""
    kin = evaluate_kinematics(plan)
    points = plan.waypoints()
    heading = np.vstack((kin.heading, kin.heading[-1:]))
    normal = np.column_stack((-heading[:, 1], heading[:, 0]))
    a_x = np.append(kin.a_x, 0.0)
    a_y = np.append(kin.a_y, 0.0)
    accel = a_x[:, None] * heading + a_y[:, None] * normal
    velocity = plan.v[:, None] * heading
    return FusedTrajectory(
        t=np.concatenate(([0.0], np.cumsum(kin.dt))),
        X=points[:, 0], Y=points[:, 1],
        vx=velocity[:, 0], vy=velocity[:, 1],
        ax=accel[:, 0], ay=accel[:, 1],
        yaw=np.arctan2(heading[:, 1], heading[:, 0]),
    )


def _sidecar(path: Path) -> Path:
    return path.with_name(f"{path.stem}.meta.yaml")


def load_log(path: PathLike) -> TelemetryLog:
    """Read a telemetry CSV and its optional metadata sidecar"""
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise TelemetryError(f"{path}: cannot read telemetry log: {str(e)}") from e

    missing = [column for column in LOG_COLUMNS if column not in frame.columns]
    if missing:
        raise TelemetryError(f"{path}: missing columns {missing}")
    unknown = set(frame["source"].unique()) - {"gps", "imu"}
    if unknown:
        raise TelemetryError(f"{path}: unknown sources {sorted(unknown)}")

    gps = frame.loc[frame["source"] == "gps", ["t", "X", "Y"]].reset_index(drop=True)
    imu = frame.loc[frame["source"] == "imu", ["t", "ax_body", "ay_body", "yaw"]].reset_index(drop=True)

    gaps, notes = [], {}
    meta_path = _sidecar(path)
    if meta_path.exists():
        meta = yaml.safe_load(meta_path.read_text(encoding="utf-8")) or {}
        gaps = [(float(a), float(b)) for a, b in meta.get("gaps", [])]
        notes = {str(k): str(v) for k, v in (meta.get("notes") or {}).items()}

    log = TelemetryLog(gps=gps, imu=imu, gaps=gaps, notes=notes)
    log.validate()
    logger.info(f"Loaded telemetry log {path}: {len(gps)} GPS fixes, {len(imu)} IMU samples")
    return log


def save_log(log: TelemetryLog, path: PathLike) -> None:
    """Write a telemetry CSV plus metadata sidecar"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    gps = log.gps.assign(source="gps")
    imu = log.imu.assign(source="imu")
    frame = pd.concat([gps, imu], ignore_index=True).reindex(columns=LOG_COLUMNS)
    frame = frame.sort_values(["t", "source"], kind="mergesort").reset_index(drop=True)
    frame.to_csv(path, index=False, float_format="%.10g")
    meta = {"gaps": [[float(a), float(b)] for a, b in log.gaps], "notes": dict(log.notes)}
    _sidecar(path).write_text(yaml.safe_dump(meta, sort_keys=False), encoding="utf-8")
    logger.info(f"Saved telemetry log to {path}")
