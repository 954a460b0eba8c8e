"""
Result persistence: run dumps, CSV tables and JSON documents
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .kinematics import plan_table
from .models import StepTiming
from .planner import SolveReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Round-trip precision keeps dumps rescorable bit-for-bit
FLOAT_FORMAT = "%.17g"

METRIC_COLUMNS = [
    "label", "mode", "objective", "weight", "preview_time", "horizon", "sampling_time",
    "travel_time", "d_ms", "d_ma", "squared_msdv", "peak_ax", "peak_ay", "peak_combined",
    "d_ms_longitudinal", "d_ms_lateral", "d_ma_longitudinal", "d_ma_lateral",
    "cost", "iterations", "converged", "flagged_steps",
]

TIMING_COLUMNS = list(StepTiming.model_fields)


def write_csv(frame: pd.DataFrame, path: PathLike) -> None:
    """Write a table with a fixed float format"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.info(f"Wrote {len(frame)} rows to {path}")
    except OSError as e:
        logger.error(f"Error writing {path}: {str(e)}")
        raise


def read_csv(path: PathLike) -> Optional[pd.DataFrame]:
    """Read a table; None when the file does not exist"""
    path = Path(path)
    if not path.exists():
        return None
    try:
        return pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        logger.error(f"Error reading {path}: {str(e)}")
        return None


def write_json(data: Dict[str, Any], path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: PathLike) -> Dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def metrics_row(label: str, report: SolveReport) -> Dict[str, Any]:
    """One metrics-table row of a solve; timing is left out so reruns compare equal"""
    config = report.config
    receding = config.mode.value == "receding_horizon"
    row: Dict[str, Any] = {
        "label": label,
        "mode": config.mode.value,
        "objective": config.objective.kind.value,
        "weight": config.objective.weight,
        "preview_time": config.preview.preview_time if receding else np.nan,
        "horizon": config.preview.horizon if receding else np.nan,
        "sampling_time": config.preview.sampling_time if receding else np.nan,
    }
    row.update(report.metrics.model_dump())
    row.update({
        "cost": report.cost,
        "iterations": report.iterations,
        "converged": report.converged,
        "flagged_steps": len(report.flagged_steps),
    })
    return row


def save_run(run_dir: PathLike, label: str, report: SolveReport) -> Path:
    """Persist report.json and trajectory.csv of one solve"""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    write_csv(plan_table(report.plan), run_dir / "trajectory.csv")
    write_json({
        "label": label,
        "config": report.config.model_dump(mode="json"),
        "metrics": report.metrics.model_dump(),
        "cost": report.cost,
        "iterations": report.iterations,
        "converged": report.converged,
        "solve_time": report.solve_time,
        "flagged_steps": report.flagged_steps,
    }, run_dir / "report.json")
    return run_dir


def timing_frame(timings: List[StepTiming], label: str) -> pd.DataFrame:
    frame = pd.DataFrame([t.model_dump(mode="json") for t in timings], columns=TIMING_COLUMNS)
    frame.insert(0, "label", label)
    return frame
