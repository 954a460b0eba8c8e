"""
Tests for telemetry gap filling, GPS/IMU fusion, scoring and log files
"""

import numpy as np
import pandas as pd
import pytest

from comfort_planner.errors import TelemetryError
from comfort_planner.kinematics import MotionPlan
from comfort_planner.models import DriveRecipe, ObjectiveSpec
from comfort_planner.objective import metrics
from comfort_planner.road import build_stations
from comfort_planner.synthetic import load_recipe, render_drive, synthesize_drive
from comfort_planner.telemetry import (
    FusedTrajectory, TelemetryLog, fuse, interpolate_gaps, load_log, save_log, score_drive,
    trajectory_from_plan, vehicle_frame_sequence,
)
from conftest import ROOT

IMU_RATE, GPS_RATE = 20.0, 10.0


def sample_times(duration: float, rate: float) -> np.ndarray:
    return np.arange(int(round(duration * rate)) + 1) / rate


def straight_log(v0=20.0, accel=0.0, duration=10.0, y0=5.0) -> TelemetryLog:
    """Drive along +X with constant acceleration, noiseless"""
    imu_t = sample_times(duration, IMU_RATE)
    gps_t = sample_times(duration, GPS_RATE)
    imu = pd.DataFrame({"t": imu_t, "ax_body": accel, "ay_body": 0.0, "yaw": 0.0})
    gps = pd.DataFrame({"t": gps_t, "X": v0 * gps_t + 0.5 * accel * gps_t ** 2, "Y": y0})
    return TelemetryLog(gps=gps, imu=imu)


def circle_truth(t, radius=50.0, speed=10.0):
    omega = speed / radius
    return radius * np.sin(omega * t), radius * (1.0 - np.cos(omega * t)), omega * t


def circle_log(rng, noise=0.5, duration=30.0, radius=50.0, speed=10.0) -> TelemetryLog:
    """Constant-speed left circle with noisy GPS"""
    imu_t = sample_times(duration, IMU_RATE)
    gps_t = sample_times(duration, GPS_RATE)
    _, _, yaw = circle_truth(imu_t, radius, speed)
    imu = pd.DataFrame({"t": imu_t, "ax_body": 0.0, "ay_body": speed ** 2 / radius, "yaw": yaw})
    X, Y, _ = circle_truth(gps_t, radius, speed)
    gps = pd.DataFrame({
        "t": gps_t,
        "X": X + rng.normal(0.0, noise, len(gps_t)),
        "Y": Y + rng.normal(0.0, noise, len(gps_t)),
    })
    return TelemetryLog(gps=gps, imu=imu)


def transformed(log: TelemetryLog, angle: float, shift) -> TelemetryLog:
    c, s = np.cos(angle), np.sin(angle)
    gps = log.gps.copy()
    gps["X"] = c * log.gps["X"] - s * log.gps["Y"] + shift[0]
    gps["Y"] = s * log.gps["X"] + c * log.gps["Y"] + shift[1]
    imu = log.imu.copy()
    imu["yaw"] = log.imu["yaw"] + angle
    return TelemetryLog(gps=gps, imu=imu, gaps=list(log.gaps))


def test_interpolate_gap_linearly():
    """Test fixes inside an outage are replaced along the bracketing line"""
    gps = pd.DataFrame({"t": [0.0, 1.0, 2.0, 3.0, 4.0], "X": [0.0, 9.0, np.nan, 9.0, 4.0], "Y": [0.0, 1.0, 2.0, 3.0, 4.0]})
    log = TelemetryLog(gps=gps, imu=pd.DataFrame(), gaps=[(0.5, 3.5)])
    filled = interpolate_gaps(log)
    np.testing.assert_allclose(filled.gps["X"], [0.0, 1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(filled.gps["Y"], [0.0, 1.0, 2.0, 3.0, 4.0])
    assert log.gps["X"].isna().sum() == 1


def test_interpolate_invalid_fix_outside_gaps():
    """Test a missing fix without a declared gap is also filled"""
    gps = pd.DataFrame({"t": [0.0, 1.0, 2.0], "X": [0.0, np.nan, 4.0], "Y": [1.0, 1.0, 1.0]})
    filled = interpolate_gaps(TelemetryLog(gps=gps, imu=pd.DataFrame()))
    assert filled.gps["X"][1] == pytest.approx(2.0)


def test_interpolate_without_gaps_is_identity():
    """Test a clean stream passes through unchanged"""
    log = straight_log()
    filled = interpolate_gaps(log)
    pd.testing.assert_frame_equal(filled.gps, log.gps)


def test_gap_at_stream_edge_rejected():
    """Test an outage covering the first fix cannot be interpolated"""
    gps = pd.DataFrame({"t": [0.0, 1.0, 2.0], "X": [0.0, 1.0, 2.0], "Y": [0.0, 0.0, 0.0]})
    with pytest.raises(TelemetryError, match="start or end"):
        interpolate_gaps(TelemetryLog(gps=gps, imu=pd.DataFrame(), gaps=[(-1.0, 0.5)]))


def test_fusion_constant_velocity_is_exact():
    """Test noiseless constant-velocity data is reproduced"""
    trajectory = fuse(straight_log(v0=20.0))
    t = trajectory.t
    np.testing.assert_allclose(trajectory.X, 20.0 * t, atol=1e-6)
    np.testing.assert_allclose(trajectory.Y, 5.0, atol=1e-6)
    np.testing.assert_allclose(trajectory.vx, 20.0, atol=1e-6)
    np.testing.assert_allclose(trajectory.vy, 0.0, atol=1e-6)
    np.testing.assert_allclose(trajectory.ax, 0.0, atol=1e-6)


def test_fusion_constant_acceleration_is_exact():
    """Test noiseless constant-acceleration data is reproduced"""
    trajectory = fuse(straight_log(v0=15.0, accel=1.5))
    t = trajectory.t
    np.testing.assert_allclose(trajectory.X, 15.0 * t + 0.75 * t ** 2, atol=1e-6)
    np.testing.assert_allclose(trajectory.vx, 15.0 + 1.5 * t, atol=1e-6)
    np.testing.assert_allclose(trajectory.ax[:-1], 1.5, atol=1e-6)


def test_fusion_beats_raw_gps(rng):
    """Test fused positions on a noisy circle are at least twice as accurate as the fixes"""
    fused_errors, raw_errors = [], []
    for _ in range(20):
        log = circle_log(rng)
        trajectory = fuse(log)
        settled = trajectory.t >= 5.0
        X, Y, _ = circle_truth(trajectory.t[settled])
        fused_errors.append(np.hypot(trajectory.X[settled] - X, trajectory.Y[settled] - Y))
        gps_t = log.gps["t"].to_numpy()
        X, Y, _ = circle_truth(gps_t)
        raw = np.hypot(log.gps["X"].to_numpy() - X, log.gps["Y"].to_numpy() - Y)
        raw_errors.append(raw[gps_t >= 5.0])
    fused_rmse = np.sqrt(np.mean(np.concatenate(fused_errors) ** 2))
    raw_rmse = np.sqrt(np.mean(np.concatenate(raw_errors) ** 2))
    assert fused_rmse <= 0.5 * raw_rmse


def test_fusion_equivariance(rng):
    """Test rotating and shifting the log moves the estimate rigidly and keeps the score"""
    log = circle_log(rng)
    angle, shift = 0.7, (100.0, -50.0)
    base = fuse(log)
    moved = fuse(transformed(log, angle, shift))
    c, s = np.cos(angle), np.sin(angle)
    np.testing.assert_allclose(moved.X, c * base.X - s * base.Y + shift[0], atol=1e-6)
    np.testing.assert_allclose(moved.Y, s * base.X + c * base.Y + shift[1], atol=1e-6)
    base_score = score_drive(base)
    moved_score = score_drive(moved)
    assert moved_score.d_ma == pytest.approx(base_score.d_ma, rel=1e-6)
    assert moved_score.squared_msdv == pytest.approx(base_score.squared_msdv, rel=1e-6)


def test_variance_grows_in_outage_and_drops_at_fix():
    """Test prediction-only stretches inflate the variance and a fix shrinks it"""
    log = straight_log()
    keep = (log.gps["t"] <= 2.0) | (log.gps["t"] >= 4.0)
    log = TelemetryLog(gps=log.gps[keep].reset_index(drop=True), imu=log.imu)
    trajectory = fuse(log)
    variance = trajectory.cov_x[:, 0, 0]
    inside = (trajectory.t > 2.01) & (trajectory.t < 3.99)
    assert np.all(np.diff(variance[inside]) > 0.0)
    first_fix = int(np.argmin(np.abs(trajectory.t - 4.0)))
    assert variance[first_fix] < variance[first_fix - 1]


def test_covariances_stay_positive_semidefinite(rng):
    """Test every posterior covariance is symmetric PSD and nothing is flagged"""
    trajectory = fuse(circle_log(rng))
    for covariance in np.concatenate((trajectory.cov_x, trajectory.cov_y)):
        np.testing.assert_allclose(covariance, covariance.T)
        assert np.min(np.linalg.eigvalsh(covariance)) >= -1e-12
    assert not trajectory.flagged.any()


def test_fusion_rejects_invalid_fixes():
    """Test fusing without gap filling raises on NaN fixes"""
    log = straight_log()
    log.gps.loc[3, "X"] = np.nan
    with pytest.raises(TelemetryError, match="interpolate gaps first"):
        fuse(log)


def test_plan_trajectory_scores_like_plan(quarter_turn_road, rng):
    """Test a plan turned into a trajectory scores the same as the plan"""
    stations = build_stations(quarter_turn_road)
    n = len(stations)
    plan = MotionPlan(stations, rng.uniform(-0.5, 0.5, n), rng.uniform(8.0, 12.0, n))
    expected = metrics(plan, ObjectiveSpec())
    scored = score_drive(trajectory_from_plan(plan))
    for name, value in expected.model_dump().items():
        assert getattr(scored, name) == pytest.approx(value, rel=1e-6, abs=1e-12)


def test_zero_acceleration_drive_scores_zero():
    """Test a constant-velocity drive has no comfort cost"""
    scored = score_drive(fuse(straight_log()))
    assert scored.d_ma < 1e-12
    assert scored.squared_msdv < 1e-12
    assert scored.travel_time == pytest.approx(10.0)


def test_low_speed_uses_yaw():
    """Test the vehicle frame falls back to yaw when nearly stationary"""
    trajectory = FusedTrajectory(
        t=np.array([0.0, 1.0, 2.0]),
        X=np.zeros(3), Y=np.array([0.0, 0.5, 2.0]),
        vx=np.zeros(3), vy=np.array([0.0, 1.0, 2.0]),
        ax=np.zeros(3), ay=np.array([1.0, 1.0, 0.0]),
        yaw=np.full(3, 0.5 * np.pi),
    )
    a_long, a_lat, dt = vehicle_frame_sequence(trajectory)
    np.testing.assert_allclose(a_long, [1.0, 1.0])
    np.testing.assert_allclose(a_lat, [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(dt, [1.0, 1.0])

    trajectory.yaw = None
    with pytest.raises(TelemetryError, match="no yaw"):
        vehicle_frame_sequence(trajectory)


def test_log_round_trip(tmp_path):
    """Test a saved log loads back with its gaps and notes"""
    log = straight_log(duration=2.0)
    log.gps.loc[(log.gps["t"] >= 0.5) & (log.gps["t"] <= 0.8), ["X", "Y"]] = np.nan
    log.gaps = [(0.5, 0.8)]
    log.notes = {"vehicle": "test"}
    path = tmp_path / "drive.csv"
    save_log(log, path)
    loaded = load_log(path)
    pd.testing.assert_frame_equal(loaded.gps, log.gps, check_dtype=False)
    pd.testing.assert_frame_equal(loaded.imu, log.imu, check_dtype=False)
    assert loaded.gaps == [(0.5, 0.8)]
    assert loaded.notes == {"vehicle": "test"}
    assert (tmp_path / "drive.meta.yaml").exists()


def test_log_missing_columns(tmp_path):
    """Test a log without the required columns is rejected"""
    path = tmp_path / "bad.csv"
    path.write_text("t,source,X\n0.0,gps,1.0\n", encoding="utf-8")
    with pytest.raises(TelemetryError, match="missing columns"):
        load_log(path)


def test_log_unknown_source(tmp_path):
    """Test rows from an unknown sensor are rejected"""
    path = tmp_path / "bad.csv"
    path.write_text("t,source,X,Y,ax_body,ay_body,yaw\n0.0,lidar,1,1,,,\n", encoding="utf-8")
    with pytest.raises(TelemetryError, match="unknown sources"):
        load_log(path)


def test_log_validation():
    """Test timestamp order and yaw unwrapping are enforced"""
    log = straight_log(duration=1.0)
    log.imu.loc[5, "t"] = log.imu.loc[4, "t"]
    with pytest.raises(TelemetryError, match="strictly increasing"):
        log.validate()

    log = straight_log(duration=1.0)
    log.imu.loc[5:, "yaw"] = 2.0 * np.pi
    with pytest.raises(TelemetryError, match="unwrapped"):
        log.validate()


def test_synthetic_render_sizes(in_root):
    """Test the bundled recipe renders both streams with the outage blanked"""
    recipe = load_recipe("samples/drive_synthetic_01.yaml")
    log = render_drive(recipe, (1.0, 1.0))
    assert len(log.imu) == 1477
    assert len(log.gps) == 739
    in_gap = (log.gps["t"] >= 30.0) & (log.gps["t"] <= 45.0)
    assert log.gps.loc[in_gap, "X"].isna().all()
    assert log.gps.loc[~in_gap, "X"].notna().all()
    assert log.notes["synthetic"] == "true"
    log.validate()


def zoh_recipe(**overrides) -> DriveRecipe:
    """Short drive: braked left turn, straight outage, then a lateral burst"""
    data = {
        "duration": 10.0, "initial_speed": 15.0, "integration": "zoh", "gaps": [[6.0, 7.5]],
        "maneuvers": [
            {"axis": "lateral", "center": 3.0, "width": 3.0, "amplitude": 2.0},
            {"axis": "longitudinal", "center": 3.0, "width": 2.0, "amplitude": -1.0},
        ],
        "bursts": [{"axis": "lateral", "center": 8.8, "width": 2.0, "amplitude": 0.5, "frequency": 1.0}],
    }
    data.update(overrides)
    return DriveRecipe.model_validate(data)


def test_zoh_drive_fuses_to_body_accelerations():
    """Test gap filling and fusion recover the held body accelerations of a zoh drive"""
    log = render_drive(zoh_recipe(), (1.0, 1.0))
    assert log.gps.loc[(log.gps["t"] >= 6.0) & (log.gps["t"] <= 7.5), "X"].isna().all()
    log.validate()

    a_long, a_lat, _ = vehicle_frame_sequence(fuse(interpolate_gaps(log)))
    np.testing.assert_allclose(a_long, log.imu["ax_body"].to_numpy()[:-1], atol=1e-6)
    np.testing.assert_allclose(a_lat, log.imu["ay_body"].to_numpy()[:-1], atol=1e-6)


def test_zoh_drive_needs_aligned_rates():
    """Test zoh rendering rejects GPS fixes that fall between IMU samples"""
    with pytest.raises(TelemetryError, match="multiple of gps_rate"):
        render_drive(zoh_recipe(gps_rate=3.0, gaps=[]), (1.0, 1.0))


def test_bundled_drive_log_scores_to_targets():
    """Test the shipped synthetic log reproduces the reference drive metrics"""
    log = load_log(ROOT / "samples" / "drive_synthetic_01.csv")
    assert log.gaps == [(30.0, 45.0)]
    assert log.notes["synthetic"] == "true"

    scored = score_drive(fuse(interpolate_gaps(log)))
    assert scored.travel_time == pytest.approx(73.8, rel=1e-3)
    assert scored.d_ma == pytest.approx(259.8, rel=1e-2)
    assert scored.squared_msdv == pytest.approx(177.9, rel=1e-2)


@pytest.mark.slow
def test_synthetic_drive_calibration(tmp_path):
    """Test the calibrated drive reproduces its target metrics after a save and reload"""
    recipe = load_recipe(ROOT / "samples" / "drive_synthetic_01.yaml")
    log, scored = synthesize_drive(recipe)
    assert scored.d_ma == pytest.approx(recipe.target_d_ma, rel=recipe.tolerance)
    assert scored.squared_msdv == pytest.approx(recipe.target_squared_msdv, rel=recipe.tolerance)

    path = tmp_path / "drive.csv"
    save_log(log, path)
    rescored = score_drive(fuse(interpolate_gaps(load_log(path))))
    assert rescored.d_ma == pytest.approx(recipe.target_d_ma, rel=1e-2)
    assert rescored.squared_msdv == pytest.approx(recipe.target_squared_msdv, rel=1e-2)
    assert rescored.travel_time == pytest.approx(73.8)
