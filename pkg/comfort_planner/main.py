"""
Comfort Motion Planner - command-line entry point
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from .config import settings
from .errors import ComfortPlannerError, ConfigError, RoadFileError
from .harness import (
    benchmark_timing, emit_plot_data, load_scenario, rescore_dump, run_experiment, run_label, score_logs,
)
from .models import ObjectiveKind, PlannerMode, PreviewSetting
from .planner import solve
from .road import load_road
from .storage import metrics_row, save_run, write_csv
from .synthetic import load_recipe, synthesize_drive
from .telemetry import save_log

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Scenario fields given on the command line"""
    overrides: Dict[str, Any] = {}
    if getattr(args, "road", None):
        overrides["road"] = args.road
    if getattr(args, "objectives", None):
        overrides["objectives"] = args.objectives
    if getattr(args, "weights", None):
        overrides["weights"] = args.weights
    if getattr(args, "modes", None):
        overrides["modes"] = args.modes
    if getattr(args, "preview", None):
        overrides["preview_grid"] = [{"preview_time": tp, "horizon": int(n)} for tp, n in args.preview]
    if getattr(args, "workers", None):
        overrides["workers"] = args.workers
    if getattr(args, "output", None):
        overrides["output_dir"] = args.output
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return overrides


def cmd_plan(args: argparse.Namespace) -> int:
    overrides = _flag_overrides(args)
    overrides.setdefault("weights", [args.weight])
    scenario = load_scenario(args.config, overrides)
    preview = scenario.preview_grid[0]
    road = load_road(scenario.road)

    rows = []
    exit_code = EXIT_OK
    for kind in scenario.objectives:
        config = scenario.planner_config(scenario.modes[0], kind, scenario.weights[0], preview)
        config = config.model_copy(update={"init_jitter": args.jitter})
        report = solve(road, config)
        label = run_label(config)
        save_run(Path(scenario.output_dir) / "runs" / label, label, report)
        rows.append(metrics_row(label, report))
        if not report.converged:
            exit_code = EXIT_FAILED
    print(json.dumps(rows, indent=2, default=str))
    return exit_code


def cmd_sweep(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.config or settings.DEFAULT_SCENARIO, _flag_overrides(args))
    result = run_experiment(scenario)
    if args.emit_plots:
        emit_plot_data(result.output_dir)
    return result.exit_code


def cmd_score(args: argparse.Namespace) -> int:
    frame = score_logs(args.logs)
    if frame.empty:
        logger.error("No telemetry log could be scored")
        return EXIT_FAILED
    write_csv(frame, Path(args.output) / "telemetry_scores.csv")
    print(frame.to_string(index=False))
    return EXIT_OK if len(frame) == len(args.logs) else EXIT_FAILED


def cmd_bench(args: argparse.Namespace) -> int:
    overrides = _flag_overrides(args)
    if args.weight is not None:
        overrides["bench_weight"] = args.weight
    scenario = load_scenario(args.config or settings.DEFAULT_SCENARIO, overrides)
    summary = benchmark_timing(scenario)
    if summary.empty:
        return EXIT_FAILED
    print(summary.to_string(index=False))
    return EXIT_OK


def cmd_emit_plots(args: argparse.Namespace) -> int:
    written = emit_plot_data(args.results)
    return EXIT_OK if written else EXIT_FAILED


def cmd_rescore(args: argparse.Namespace) -> int:
    print(json.dumps(rescore_dump(args.run).model_dump(), indent=2))
    return EXIT_OK


def cmd_synth_drive(args: argparse.Namespace) -> int:
    recipe = load_recipe(args.recipe)
    log, scored = synthesize_drive(recipe)
    output = Path(args.output or Path(settings.SAMPLES_DIR) / f"{recipe.name}.csv")
    save_log(log, output)
    print(json.dumps(scored.model_dump(), indent=2))
    return EXIT_OK


def _preview_pair(text: str) -> List[float]:
    try:
        preview_time, horizon = text.split(",")
        PreviewSetting(preview_time=float(preview_time), horizon=int(horizon))
        return [float(preview_time), int(horizon)]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected T_p,N_p, got '{text}'") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="comfort-planner", description=settings.PROJECT_NAME)
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    commands = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--config", help="Scenario file; its values override flags")
        sub.add_argument("--road", help="Road file")
        sub.add_argument("--objectives", nargs="+", type=ObjectiveKind, choices=list(ObjectiveKind))
        sub.add_argument("--modes", nargs="+", type=PlannerMode, choices=list(PlannerMode))
        sub.add_argument("--weights", nargs="+", type=float, help="W grid")
        sub.add_argument("--preview", nargs="+", type=_preview_pair, help="T_p,N_p pairs")
        sub.add_argument("--workers", type=int)
        sub.add_argument("--output", help="Output directory")
        sub.add_argument("--seed", type=int)

    plan = commands.add_parser("plan", help="Single solve")
    scenario_flags(plan)
    plan.add_argument("--weight", type=float, default=1.0)
    plan.add_argument("--jitter", type=float, default=0.0, help="Initial speed jitter [m/s]")
    plan.set_defaults(handler=cmd_plan)

    sweep = commands.add_parser("sweep", help="W and preview grids")
    scenario_flags(sweep)
    sweep.add_argument("--emit-plots", action="store_true")
    sweep.set_defaults(handler=cmd_sweep)

    score = commands.add_parser("score", help="Score telemetry logs")
    score.add_argument("logs", nargs="+")
    score.add_argument("--output", default=settings.OUTPUT_DIR)
    score.set_defaults(handler=cmd_score)

    bench = commands.add_parser("bench", help="Receding-horizon timing benchmark")
    scenario_flags(bench)
    bench.add_argument("--weight", type=float)
    bench.set_defaults(handler=cmd_bench)

    plots = commands.add_parser("emit-plots", help="Plot data from a result set")
    plots.add_argument("results", nargs="?", default=settings.OUTPUT_DIR)
    plots.set_defaults(handler=cmd_emit_plots)

    rescore = commands.add_parser("rescore", help="Recompute metrics from a run dump")
    rescore.add_argument("run")
    rescore.set_defaults(handler=cmd_rescore)

    synth = commands.add_parser("synth-drive", help="Generate a calibrated synthetic telemetry log")
    synth.add_argument("recipe")
    synth.add_argument("--output")
    synth.set_defaults(handler=cmd_synth_drive)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=settings.LOG_FORMAT)
    try:
        return args.handler(args)
    except (ConfigError, RoadFileError) as e:
        logger.error(f"Configuration error: {str(e)}")
        return EXIT_CONFIG
    except ComfortPlannerError as e:
        logger.error(f"Error running {args.command}: {str(e)}")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
