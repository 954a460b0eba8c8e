"""
Synthetic GPS/IMU drives calibrated to target comfort metrics
"""

import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError
from scipy.integrate import solve_ivp

from .errors import ConfigError, TelemetryError
from .models import Axis, DriveIntegration, DriveRecipe, PlanMetrics, PulseShape
from .telemetry import TelemetryLog, fuse, interpolate_gaps, score_drive

logger = logging.getLogger(__name__)

MIN_SPEED = 1.0


def pulse(shape: PulseShape, t: np.ndarray) -> np.ndarray:
    """sin^2 envelope over [center - width/2, center + width/2], optionally modulating a sinusoid"""
    start = shape.center - 0.5 * shape.width
    phase = (t - start) / shape.width
    inside = (phase >= 0.0) & (phase <= 1.0)
    envelope = np.where(inside, np.sin(np.pi * phase) ** 2, 0.0)
    if shape.frequency is not None:
        envelope = envelope * np.sin(2.0 * np.pi * shape.frequency * (t - start))
    return shape.amplitude * envelope


def body_accelerations(recipe: DriveRecipe, scales: Tuple[float, float], t: np.ndarray) -> np.ndarray:
    """(a_long, a_lat) at times t for the given manoeuvre and burst scales"""
    accel = np.zeros((len(np.atleast_1d(t)), 2))
    for group, scale in ((recipe.maneuvers, scales[0]), (recipe.bursts, scales[1])):
        for shape in group:
            column = 0 if shape.axis == Axis.LONGITUDINAL else 1
            accel[:, column] += scale * pulse(shape, np.atleast_1d(t))
    return accel


def _ode_states(recipe: DriveRecipe, scales: Tuple[float, float], imu_t: np.ndarray,
                gps_t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(yaw, speed) at the IMU samples and (X, Y) at the GPS fixes from a continuous heading/speed model"""
    def dynamics(t: float, state: np.ndarray) -> np.ndarray:
        _, _, heading, speed = state
        a_long, a_lat = body_accelerations(recipe, scales, np.array([t]))[0]
        speed = max(speed, MIN_SPEED)
        return np.array([speed * np.cos(heading), speed * np.sin(heading), a_lat / speed, a_long])

    solution = solve_ivp(
        dynamics, (0.0, recipe.duration), np.array([0.0, 0.0, 0.0, recipe.initial_speed]),
        method="DOP853", dense_output=True, rtol=1e-10, atol=1e-9, max_step=0.05,
    )
    if not solution.success:
        raise TelemetryError(f"drive integration failed: {solution.message}")
    imu_state = solution.sol(imu_t)
    gps_state = solution.sol(gps_t)
    return imu_state[2], imu_state[3], gps_state[:2].T


def _zoh_states(recipe: DriveRecipe, scales: Tuple[float, float], imu_t: np.ndarray,
                gps_t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Same outputs, with the body accelerations held over each IMU step and yaw along the velocity.

    The motion model matches the fusion filter prediction step.
    """
    index = np.rint(gps_t * recipe.imu_rate).astype(int)
    if index[-1] >= len(imu_t) or not np.allclose(imu_t[index], gps_t, rtol=0.0, atol=1e-9):
        raise TelemetryError("zoh drives need GPS fixes on IMU samples (imu_rate a multiple of gps_rate)")

    accel = body_accelerations(recipe, scales, imu_t)
    count = len(imu_t)
    position = np.zeros((count, 2))
    velocity = np.zeros((count, 2))
    velocity[0] = (recipe.initial_speed, 0.0)
    yaw = np.zeros(count)
    for k in range(count):
        yaw[k] = np.arctan2(velocity[k, 1], velocity[k, 0])
        if k == count - 1:
            break
        dt = imu_t[k + 1] - imu_t[k]
        c, s = np.cos(yaw[k]), np.sin(yaw[k])
        a_global = np.array([c * accel[k, 0] - s * accel[k, 1], s * accel[k, 0] + c * accel[k, 1]])
        position[k + 1] = position[k] + velocity[k] * dt + 0.5 * a_global * dt ** 2
        velocity[k + 1] = velocity[k] + a_global * dt
    return np.unwrap(yaw), np.hypot(velocity[:, 0], velocity[:, 1]), position[index]


def render_drive(recipe: DriveRecipe, scales: Tuple[float, float]) -> TelemetryLog:
    """Integrate the body accelerations along a path and sample GPS and IMU streams"""
    imu_t = np.arange(int(round(recipe.duration * recipe.imu_rate)) + 1) / recipe.imu_rate
    gps_t = np.arange(int(round(recipe.duration * recipe.gps_rate)) + 1) / recipe.gps_rate
    states = _zoh_states if recipe.integration == DriveIntegration.ZOH else _ode_states
    yaw, speed, gps_xy = states(recipe, scales, imu_t, gps_t)
    if np.min(speed) < MIN_SPEED:
        raise TelemetryError("synthetic drive speed dropped below 1 m/s; reduce the manoeuvre scale")

    accel = body_accelerations(recipe, scales, imu_t)
    imu = pd.DataFrame({"t": imu_t, "ax_body": accel[:, 0], "ay_body": accel[:, 1], "yaw": yaw})

    rng = np.random.default_rng(recipe.seed)
    X = gps_xy[:, 0] + rng.normal(0.0, recipe.gps_noise, len(gps_t)) if recipe.gps_noise else gps_xy[:, 0]
    Y = gps_xy[:, 1] + rng.normal(0.0, recipe.gps_noise, len(gps_t)) if recipe.gps_noise else gps_xy[:, 1]
    gps = pd.DataFrame({"t": gps_t, "X": X, "Y": Y})
    for start, end in recipe.gaps:
        gps.loc[(gps["t"] >= start) & (gps["t"] <= end), ["X", "Y"]] = np.nan

    return TelemetryLog(
        gps=gps,
        imu=imu,
        gaps=[(float(a), float(b)) for a, b in recipe.gaps],
        notes={"synthetic": "true", "recipe": recipe.name},
    )


def score_recipe(recipe: DriveRecipe, scales: Tuple[float, float]) -> Tuple[TelemetryLog, PlanMetrics]:
    """Render a drive and score it through gap filling and fusion"""
    log = render_drive(recipe, scales)
    return log, score_drive(fuse(interpolate_gaps(log)))


def synthesize_drive(recipe: DriveRecipe) -> Tuple[TelemetryLog, PlanMetrics]:
    """Drive whose scored D_MA and squared MSDV match the recipe targets.

    Energies scale roughly with the squared manoeuvre and burst scales, so
    p = (scale_m^2, scale_b^2) is found with chord steps on the 2x2 response
    measured from one run per component.
    """
    target = np.array([recipe.target_d_ma, recipe.target_squared_msdv])

    def response(p: np.ndarray) -> Tuple[TelemetryLog, PlanMetrics, np.ndarray]:
        log, scored = score_recipe(recipe, (float(np.sqrt(p[0])), float(np.sqrt(p[1]))))
        return log, scored, np.array([scored.d_ma, scored.squared_msdv])

    basis = np.column_stack([response(np.array(unit))[2] for unit in ((1.0, 0.0), (0.0, 1.0))])
    try:
        p = np.linalg.solve(basis, target)
    except np.linalg.LinAlgError as e:
        raise TelemetryError(f"recipe shapes cannot separate the targets: {str(e)}") from e
    if np.any(p <= 0.0):
        raise TelemetryError(f"targets not reachable with the recipe shapes (scales^2 = {p})")

    for iteration in range(recipe.max_iterations):
        log, scored, value = response(p)
        residual = target - value
        logger.info(
            f"Calibration {iteration}: D_MA={value[0]:.2f}, MSDV^2={value[1]:.2f}, "
            f"scales=({np.sqrt(p[0]):.4f}, {np.sqrt(p[1]):.4f})"
        )
        if np.max(np.abs(residual) / target) <= recipe.tolerance:
            log.notes.update({
                "maneuver_scale": f"{np.sqrt(p[0]):.10g}",
                "burst_scale": f"{np.sqrt(p[1]):.10g}",
            })
            return log, scored
        p = np.clip(p + np.linalg.solve(basis, residual), 1e-6, None)

    raise TelemetryError(f"calibration did not reach tolerance {recipe.tolerance} in {recipe.max_iterations} iterations")


def load_recipe(path: Union[str, Path]) -> DriveRecipe:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        return DriveRecipe.model_validate(data)
    except (OSError, yaml.YAMLError, ValidationError) as e:
        raise ConfigError(f"{path}: invalid drive recipe: {str(e)}") from e
