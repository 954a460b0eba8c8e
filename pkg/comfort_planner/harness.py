"""
Experiment orchestration: W sweeps, preview grids, matched comparisons,
telemetry scoring, timing benchmarks and plot data
"""

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

from . import __version__
from .errors import ComfortPlannerError, ConfigError
from .models import ObjectiveKind, PlanMetrics, PlannerConfig, PlannerMode, RoadProfile, ScenarioConfig
from .objective import metrics_from_sequence
from .planner import SolveReport, match_travel_time, solve, solve_integral
from .road import load_road
from .storage import (
    METRIC_COLUMNS, metrics_row, read_csv, read_json, save_run, timing_frame, write_csv, write_json,
)
from .telemetry import fuse, interpolate_gaps, load_log, score_drive

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

RATIO_RANGE = (3.0, 10.0)
DEPENDENCIES = ["numpy", "scipy", "pandas", "pydantic", "pydantic-settings", "filterpy", "PyYAML"]


def load_scenario(path: Optional[PathLike] = None, overrides: Optional[Dict[str, Any]] = None) -> ScenarioConfig:
    """Scenario from flags and an optional file; file values win over flags"""
    data: Dict[str, Any] = dict(overrides or {})
    base_dir = Path(".")
    if path is not None:
        path = Path(path)
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"{path}: cannot read scenario: {str(e)}") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: scenario must be a mapping")
        data.update(loaded)
        base_dir = path.parent

    try:
        scenario = ScenarioConfig.model_validate(data)
    except ValidationError as e:
        details = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid scenario: {details}") from e

    road_path = Path(scenario.road)
    if not road_path.exists() and (base_dir / road_path).exists():
        scenario = scenario.model_copy(update={"road": str(base_dir / road_path)})
    elif not road_path.exists():
        raise ConfigError(f"road file not found: {scenario.road}")
    logs = []
    for log_path in scenario.telemetry:
        if not Path(log_path).exists() and (base_dir / log_path).exists():
            log_path = str(base_dir / log_path)
        elif not Path(log_path).exists():
            raise ConfigError(f"telemetry log not found: {log_path}")
        logs.append(log_path)
    if logs != list(scenario.telemetry):
        scenario = scenario.model_copy(update={"telemetry": logs})
    return scenario


def run_label(config: PlannerConfig) -> str:
    label = f"{config.mode.value}_{config.objective.kind.value}_W{config.objective.weight:.6g}"
    if config.mode == PlannerMode.RECEDING_HORIZON:
        label += f"_{config.preview.label}"
    return label


def _solve_task(task: Tuple[str, RoadProfile, PlannerConfig]) -> Tuple[str, Optional[SolveReport], Optional[str]]:
    label, road, config = task
    try:
        return label, solve(road, config), None
    except ComfortPlannerError as e:
        logger.error(f"Error in run {label}: {str(e)}")
        return label, None, str(e)


def _percent(value: float, reference: float) -> float:
    return 100.0 * (value - reference) / reference if reference else float("nan")


def _dependency_versions() -> Dict[str, str]:
    versions = {"comfort_planner": __version__}
    for name in DEPENDENCIES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


@dataclass
class ExperimentResult:
    """Outcome of run_experiment"""
    output_dir: Path
    metrics: pd.DataFrame
    failures: Dict[str, str] = field(default_factory=dict)
    flagged: List[str] = field(default_factory=list)
    deltas: Optional[pd.DataFrame] = None

    @property
    def exit_code(self) -> int:
        return 1 if self.failures or self.flagged else 0


class ExperimentRunner:
    """Runs the grids of a scenario and writes the result set"""

    def __init__(self, scenario: ScenarioConfig, output_dir: Optional[PathLike] = None):
        self.scenario = scenario
        self.output_dir = Path(output_dir or scenario.output_dir)
        self.road = load_road(scenario.road)

    def grid_configs(self) -> List[PlannerConfig]:
        """Every (mode, objective, W, preview) point of the scenario"""
        scenario = self.scenario
        configs = []
        for mode in scenario.modes:
            for objective in scenario.objectives:
                if mode == PlannerMode.RECEDING_HORIZON:
                    for preview in scenario.preview_grid:
                        for weight in scenario.rh_weights or scenario.weights:
                            configs.append(scenario.planner_config(mode, objective, weight, preview))
                else:
                    for weight in scenario.weights:
                        configs.append(scenario.planner_config(mode, objective, weight))
        return configs

    def run_grid(self, configs: List[PlannerConfig], workers: Optional[int] = None) -> Dict[str, Any]:
        """Solve every configuration; failures are recorded, not raised"""
        tasks = [(run_label(config), self.road, config) for config in configs]
        workers = workers or self.scenario.workers
        logger.info(f"Running {len(tasks)} solves on {workers} workers")
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(_solve_task, tasks))
        else:
            outcomes = [_solve_task(task) for task in tasks]
        return {label: report if report is not None else error for label, report, error in outcomes}

    def persist(self, outcomes: Dict[str, Any]) -> Tuple[pd.DataFrame, Dict[str, str], List[str]]:
        rows, failures, flagged = [], {}, []
        for label in sorted(outcomes):
            outcome = outcomes[label]
            if isinstance(outcome, str):
                failures[label] = outcome
                continue
            save_run(self.output_dir / "runs" / label, label, outcome)
            rows.append(metrics_row(label, outcome))
            if not outcome.converged:
                flagged.append(label)
        frame = pd.DataFrame(rows, columns=METRIC_COLUMNS)
        write_csv(frame, self.output_dir / "metrics.csv")
        return frame, failures, flagged

    def write_timing(self, outcomes: Dict[str, Any]) -> None:
        """One timing file per preview setting"""
        per_preview: Dict[str, List[pd.DataFrame]] = {}
        for label in sorted(outcomes):
            outcome = outcomes[label]
            if isinstance(outcome, str) or not outcome.timings:
                continue
            per_preview.setdefault(outcome.config.preview.label, []).append(timing_frame(outcome.timings, label))
        for preview_label, frames in per_preview.items():
            write_csv(pd.concat(frames, ignore_index=True), self.output_dir / "timing" / f"rh_{preview_label}.csv")

    def compare_matched(self) -> Optional[pd.DataFrame]:
        """Integral MS vs MA at each matched travel-time target"""
        scenario = self.scenario
        if not scenario.matched_times:
            return None
        rows = []
        for target in scenario.matched_times:
            matched: Dict[ObjectiveKind, Tuple[float, SolveReport]] = {}
            for kind in (ObjectiveKind.MS, ObjectiveKind.MA):
                def solve_at(weight: float, warm, kind=kind) -> SolveReport:
                    config = scenario.planner_config(PlannerMode.INTEGRAL, kind, weight)
                    return solve_integral(self.road, config, warm)

                try:
                    matched[kind] = match_travel_time(solve_at, target, scenario.match_tolerance)
                except ComfortPlannerError as e:
                    logger.error(f"Error matching T={target:g} s for {kind.value}: {str(e)}")
                    break
                weight, report = matched[kind]
                save_run(self.output_dir / "runs" / f"matched_{kind.value}_T{target:g}", f"matched_{kind.value}_T{target:g}", report)
            if len(matched) < 2:
                continue
            (w_ms, ms), (w_ma, ma) = matched[ObjectiveKind.MS], matched[ObjectiveKind.MA]
            rows.append({
                "target_time": target,
                "weight_ms": w_ms,
                "weight_ma": w_ma,
                "travel_time_ms": ms.metrics.travel_time,
                "travel_time_ma": ma.metrics.travel_time,
                "squared_msdv_ms": ms.metrics.squared_msdv,
                "squared_msdv_ma": ma.metrics.squared_msdv,
                "d_ma_ms": ms.metrics.d_ma,
                "d_ma_ma": ma.metrics.d_ma,
                "squared_msdv_delta_pct": _percent(ms.metrics.squared_msdv, ma.metrics.squared_msdv),
                "d_ma_delta_pct": _percent(ms.metrics.d_ma, ma.metrics.d_ma),
            })
            logger.info(
                f"Matched T={target:g} s: MS squared MSDV {rows[-1]['squared_msdv_delta_pct']:+.1f}%, "
                f"D_MA {rows[-1]['d_ma_delta_pct']:+.1f}% vs MA"
            )
        frame = pd.DataFrame(rows)
        write_csv(frame, self.output_dir / "deltas.csv")
        return frame

    def score_telemetry(self) -> Optional[pd.DataFrame]:
        if not self.scenario.telemetry:
            return None
        frame = score_logs(self.scenario.telemetry, self.scenario)
        write_csv(frame, self.output_dir / "telemetry_scores.csv")
        return frame

    def write_manifest(self) -> None:
        config_json = self.scenario.model_dump_json()
        write_json({
            "scenario": self.scenario.name,
            "road": self.road.name,
            "config_hash": hashlib.sha256(config_json.encode("utf-8")).hexdigest(),
            "config": self.scenario.model_dump(mode="json"),
            "versions": _dependency_versions(),
        }, self.output_dir / "manifest.json")

    def run(self) -> ExperimentResult:
        outcomes = self.run_grid(self.grid_configs())
        frame, failures, flagged = self.persist(outcomes)
        self.write_timing(outcomes)
        write_csv(pareto_table(frame), self.output_dir / "pareto.csv")
        deltas = self.compare_matched()
        self.score_telemetry()
        self.write_manifest()
        if failures:
            logger.error(f"{len(failures)} runs failed: {', '.join(sorted(failures))}")
        if flagged:
            logger.warning(f"{len(flagged)} runs did not converge")
        return ExperimentResult(self.output_dir, frame, failures, flagged, deltas)


def run_experiment(config: ScenarioConfig, output_dir: Optional[PathLike] = None) -> ExperimentResult:
    """Run every grid point of a scenario and write the result set"""
    return ExperimentRunner(config, output_dir).run()


def pareto_table(metrics: pd.DataFrame) -> pd.DataFrame:
    columns = ["mode", "objective", "preview_time", "horizon", "sampling_time", "weight",
               "travel_time", "d_ms", "d_ma"]
    if metrics.empty:
        return pd.DataFrame(columns=columns)
    return metrics[columns].sort_values(["travel_time", "mode", "objective"], kind="mergesort").reset_index(drop=True)


def score_logs(paths: List[str], scenario: Optional[ScenarioConfig] = None) -> pd.DataFrame:
    """Gap-fill, fuse and score telemetry logs"""
    scenario = scenario or ScenarioConfig(weights=[1.0])
    rows = []
    for path in sorted(paths):
        try:
            trajectory = fuse(interpolate_gaps(load_log(path)))
            scored = score_drive(trajectory, scenario.longitudinal_filter, scenario.lateral_filter)
        except ComfortPlannerError as e:
            logger.error(f"Error scoring {path}: {str(e)}")
            continue
        rows.append({"log": Path(path).stem, **scored.model_dump()})
    return pd.DataFrame(rows)


def benchmark_timing(config: ScenarioConfig, output_dir: Optional[PathLike] = None) -> pd.DataFrame:
    """Per-step receding-horizon solve times on a single worker"""
    runner = ExperimentRunner(config, output_dir)
    weight = config.bench_weight if config.bench_weight is not None else (config.rh_weights or config.weights)[0]
    configs = [
        config.planner_config(PlannerMode.RECEDING_HORIZON, kind, weight, preview)
        for kind in config.objectives
        for preview in config.preview_grid
    ]
    outcomes = runner.run_grid(configs, workers=1)
    runner.write_timing(outcomes)

    rows = []
    for label in sorted(outcomes):
        outcome = outcomes[label]
        if isinstance(outcome, str):
            continue
        solve_ms = np.array([t.solve_ms for t in outcome.timings])
        preview = outcome.config.preview
        rows.append({
            "objective": outcome.config.objective.kind.value,
            "preview_time": preview.preview_time,
            "horizon": preview.horizon,
            "sampling_time": preview.sampling_time,
            "steps": len(solve_ms),
            "mean_ms": float(np.mean(solve_ms)),
            "p95_ms": float(np.percentile(solve_ms, 95)),
            "max_ms": float(np.max(solve_ms)),
            "real_time": bool(np.mean(solve_ms) < 1e3 * preview.sampling_time),
        })
    summary = pd.DataFrame(rows)
    if summary.empty:
        return summary

    summary = summary.sort_values(["objective", "preview_time", "sampling_time"], kind="mergesort").reset_index(drop=True)
    # Speed-up from the next shorter sampling time at the same preview time
    summary["speedup"] = summary.groupby(["objective", "preview_time"])["mean_ms"].transform(lambda s: s.shift(1) / s)
    summary["speedup_ok"] = summary["speedup"].between(*RATIO_RANGE).where(summary["speedup"].notna())

    ms = summary[summary["objective"] == ObjectiveKind.MS.value].set_index(["preview_time", "horizon"])["mean_ms"]
    ma = summary[summary["objective"] == ObjectiveKind.MA.value].set_index(["preview_time", "horizon"])["mean_ms"]
    ratio = (ma / ms).rename("ma_ms_ratio")
    summary = summary.join(ratio, on=["preview_time", "horizon"])
    write_csv(summary, runner.output_dir / "bench_summary.csv")
    return summary


def rescore_dump(path: PathLike) -> PlanMetrics:
    """Metrics recomputed from a persisted trajectory dump"""
    path = Path(path)
    run_dir = path if path.is_dir() else path.parent
    trajectory = read_csv(run_dir / "trajectory.csv")
    if trajectory is None:
        raise ConfigError(f"no trajectory dump in {run_dir}")
    segments = trajectory.iloc[:-1]
    config = PlannerConfig()
    if (run_dir / "report.json").exists():
        config = PlannerConfig.model_validate(read_json(run_dir / "report.json")["config"])
    return metrics_from_sequence(
        segments["a_x"].to_numpy(), segments["a_y"].to_numpy(), segments["dt"].to_numpy(),
        config.objective.longitudinal_filter, config.objective.lateral_filter,
    )


def _run_trajectories(output_dir: Path, prefix: str) -> pd.DataFrame:
    frames = []
    for run_dir in sorted((output_dir / "runs").glob(f"{prefix}*")):
        trajectory = read_csv(run_dir / "trajectory.csv")
        if trajectory is None:
            continue
        report = read_json(run_dir / "report.json")
        config = report["config"]
        frame = trajectory[["t", "s", "v", "a_x", "a_y"]].copy()
        frame.insert(0, "label", run_dir.name)
        frame.insert(1, "objective", config["objective"]["kind"])
        frame.insert(2, "weight", config["objective"]["weight"])
        if config["mode"] == PlannerMode.RECEDING_HORIZON.value:
            preview = config["preview"]
            frame.insert(3, "preview_time", preview["preview_time"])
            frame.insert(4, "sampling_time", preview["preview_time"] / preview["horizon"])
        frames.append(frame)
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def _comfort(frame: pd.DataFrame) -> np.ndarray:
    return np.where(frame["objective"] == ObjectiveKind.MS.value, frame["d_ms"], frame["d_ma"])


def _rh_loss(metrics: pd.DataFrame) -> pd.DataFrame:
    """Receding-horizon comfort against the integral front at the same travel time"""
    integral = metrics[metrics["mode"] == PlannerMode.INTEGRAL.value]
    receding = metrics[metrics["mode"] == PlannerMode.RECEDING_HORIZON.value]
    frames = []
    for kind, rh in receding.groupby("objective", sort=True):
        front = integral[integral["objective"] == kind].sort_values("travel_time", kind="mergesort")
        if front.empty:
            continue
        # Outside the swept travel-time range the integral comfort is unknown
        comfort_int = np.interp(rh["travel_time"], front["travel_time"], _comfort(front),
                                left=np.nan, right=np.nan)
        comfort_rh = _comfort(rh)
        frames.append(pd.DataFrame({
            "objective": kind,
            "weight": rh["weight"].to_numpy(),
            "preview_time": rh["preview_time"].to_numpy(),
            "horizon": rh["horizon"].to_numpy(),
            "sampling_time": rh["sampling_time"].to_numpy(),
            "travel_time": rh["travel_time"].to_numpy(),
            "comfort_rh": comfort_rh,
            "comfort_int": comfort_int,
            "comfort_loss_pct": 100.0 * (comfort_rh - comfort_int) / comfort_int,
        }))
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def emit_plot_data(results_dir: PathLike) -> List[Path]:
    """Plot-ready tables derived from a result set; missing inputs are skipped"""
    results_dir = Path(results_dir)
    plots = results_dir / "plots"
    metrics = read_csv(results_dir / "metrics.csv")
    written: List[Path] = []

    def emit(name: str, frame: Optional[pd.DataFrame]) -> None:
        if frame is None or frame.empty:
            logger.warning(f"Skipping {name}: no input data")
            return
        write_csv(frame, plots / name)
        written.append(plots / name)

    emit("motion_profiles.csv", _run_trajectories(results_dir, "matched_") if (results_dir / "runs").exists() else None)
    emit("pareto.csv", pareto_table(metrics) if metrics is not None else None)
    emit("rh_profiles.csv", _run_trajectories(results_dir, "receding_horizon_") if (results_dir / "runs").exists() else None)
    emit("rh_loss.csv", _rh_loss(metrics) if metrics is not None else None)
    if metrics is not None:
        peaks = metrics[["mode", "objective", "preview_time", "horizon", "sampling_time", "weight",
                         "travel_time", "peak_ax", "peak_ay", "peak_combined"]]
        emit("peak_accelerations.csv", peaks.sort_values(["mode", "objective", "weight"], kind="mergesort"))
    else:
        emit("peak_accelerations.csv", None)

    timing_files = sorted((results_dir / "timing").glob("rh_*.csv")) if (results_dir / "timing").exists() else []
    emit("computation_time.csv", pd.concat([pd.read_csv(p) for p in timing_files], ignore_index=True) if timing_files else None)

    human = read_csv(results_dir / "telemetry_scores.csv")
    if human is not None and metrics is not None:
        planner = metrics[metrics["mode"] == PlannerMode.INTEGRAL.value]
        emit("human_vs_planner.csv", pd.concat([
            pd.DataFrame({
                "source": "human", "label": human["log"], "objective": "",
                "travel_time": human["travel_time"], "squared_msdv": human["squared_msdv"], "d_ma": human["d_ma"],
            }),
            pd.DataFrame({
                "source": "planner", "label": planner["label"], "objective": planner["objective"],
                "travel_time": planner["travel_time"], "squared_msdv": planner["squared_msdv"], "d_ma": planner["d_ma"],
            }),
        ], ignore_index=True))
    else:
        emit("human_vs_planner.csv", None)
    return written
