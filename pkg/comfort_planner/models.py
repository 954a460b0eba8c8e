"""
Pydantic models for roads, planner configuration and results
"""

import logging
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from .config import settings

logger = logging.getLogger(__name__)


class PrimitiveKind(str, Enum):
    """Road primitive types"""
    LINE = "line"
    ARC = "arc"


class ObjectiveKind(str, Enum):
    """Comfort measure minimised by the planner"""
    MS = "MS"  # frequency-weighted (motion sickness)
    MA = "MA"  # raw acceleration energy


class PlannerMode(str, Enum):
    """Planning approach"""
    INTEGRAL = "integral"
    RECEDING_HORIZON = "receding_horizon"


class Axis(str, Enum):
    """Acceleration axis"""
    LONGITUDINAL = "longitudinal"
    LATERAL = "lateral"


class DriveIntegration(str, Enum):
    """How synthetic drives are integrated from body accelerations"""
    ODE = "ode"
    ZOH = "zoh"


class RoadPrimitive(BaseModel):
    """Line segment or circular arc of the lane centerline"""
    kind: PrimitiveKind = Field(..., description="Primitive type")
    length: float = Field(..., gt=0.0, description="Arclength [m]")
    curvature: float = Field(0.0, description="Signed curvature [1/m], positive turns left")
    speed_min: Optional[float] = Field(None, gt=0.0, description="Lower speed bound override [m/s]")
    speed_max: Optional[float] = Field(None, gt=0.0, description="Upper speed bound override [m/s]")
    section: Optional[str] = Field(None, description="Section tag, e.g. roundabout-1")

    @model_validator(mode="after")
    def _check_curvature(self) -> "RoadPrimitive":
        if self.kind == PrimitiveKind.ARC and self.curvature == 0.0:
            raise ValueError("arc requires nonzero curvature")
        if self.kind == PrimitiveKind.LINE and self.curvature != 0.0:
            raise ValueError("line must have zero curvature")
        return self


class RoadProfile(BaseModel):
    """Lane centerline with lateral and speed bounds"""
    name: str = Field("route", description="Route name")
    start_x: float = Field(0.0, description="Start position X [m]")
    start_y: float = Field(0.0, description="Start position Y [m]")
    start_heading: float = Field(0.0, description="Start heading [rad]")
    y_min: float = Field(..., lt=0.0, description="Lowest lateral offset [m]")
    y_max: float = Field(..., gt=0.0, description="Highest lateral offset [m]")
    d_nom: float = Field(settings.DEFAULT_STATION_INTERVAL, gt=0.0, description="Nominal station interval [m]")
    speed_min: float = Field(..., gt=0.0, description="Default lower speed bound [m/s]")
    speed_max: float = Field(..., gt=0.0, description="Default upper speed bound [m/s]")
    entry_speed: float = Field(..., gt=0.0, description="Speed at the route start [m/s]")
    exit_speed: float = Field(..., gt=0.0, description="Speed at the route end [m/s]")
    primitives: List[RoadPrimitive] = Field(default_factory=list, description="Ordered primitives")

    @model_validator(mode="after")
    def _check_speed_bounds(self) -> "RoadProfile":
        for index, primitive in enumerate(self.primitives):
            low = primitive.speed_min or self.speed_min
            high = primitive.speed_max or self.speed_max
            if not 0.0 < low < high:
                raise ValueError(f"primitive {index}: speed bounds must satisfy 0 < min < max")
        return self

    @property
    def total_length(self) -> float:
        return float(sum(p.length for p in self.primitives))


class FilterSpec(BaseModel):
    """Band-pass weighting filter H(s) = s / ((tau1 s + 1)(tau2 s + 1))"""
    tau1: float = Field(..., gt=0.0, description="Low-pass time constant [s]")
    tau2: float = Field(..., gt=0.0, description="High-pass time constant [s]")
    peak_gain: float = Field(1.0, gt=0.0, description="Passband peak gain, the sensitivity of the axis")
    gain_normalization: Optional[float] = Field(
        None, gt=0.0, description="Raw output gain; overrides peak_gain when set"
    )
    axis: Axis = Field(Axis.LATERAL, description="Axis the filter is applied to")

    @property
    def gain(self) -> float:
        if self.gain_normalization is not None:
            return self.gain_normalization
        # |H| peaks at 1 / (tau1 + tau2) for w = 1 / sqrt(tau1 tau2)
        return self.peak_gain * (self.tau1 + self.tau2)


def default_filter(axis: Axis) -> FilterSpec:
    """Default weighting filter for an axis"""
    if axis == Axis.LONGITUDINAL:
        return FilterSpec(tau1=settings.LONGITUDINAL_TAU1, tau2=settings.LONGITUDINAL_TAU2,
                          peak_gain=settings.LONGITUDINAL_PEAK_GAIN, axis=axis)
    return FilterSpec(tau1=settings.LATERAL_TAU1, tau2=settings.LATERAL_TAU2,
                      peak_gain=settings.LATERAL_PEAK_GAIN, axis=axis)


class ObjectiveSpec(BaseModel):
    """Weighted comfort / travel-time objective J = D + W T"""
    kind: ObjectiveKind = Field(ObjectiveKind.MS, description="Comfort measure")
    weight: float = Field(1.0, ge=0.0, description="Travel-time weight W")
    longitudinal_filter: FilterSpec = Field(default_factory=lambda: default_filter(Axis.LONGITUDINAL))
    lateral_filter: FilterSpec = Field(default_factory=lambda: default_filter(Axis.LATERAL))


class SolverParams(BaseModel):
    """Inner solver limits"""
    max_iterations: int = Field(settings.MAX_ITERATIONS, ge=1)
    gradient_tolerance: float = Field(settings.GRADIENT_TOLERANCE, gt=0.0)
    step_tolerance: float = Field(settings.STEP_TOLERANCE, ge=0.0)
    function_tolerance: float = Field(settings.FUNCTION_TOLERANCE, ge=0.0, description="Relative cost reduction stop")
    history: int = Field(settings.LBFGS_HISTORY, ge=1, description="L-BFGS correction pairs")

    @classmethod
    def receding_horizon(cls) -> "SolverParams":
        """Limits for the short repeated horizon solves"""
        return cls(
            max_iterations=settings.RH_MAX_ITERATIONS,
            gradient_tolerance=settings.RH_GRADIENT_TOLERANCE,
            function_tolerance=settings.RH_FUNCTION_TOLERANCE,
        )


class PreviewSetting(BaseModel):
    """Receding-horizon preview time and horizon length"""
    preview_time: float = Field(3.0, gt=0.0, description="T_p [s]")
    horizon: int = Field(15, ge=3, description="N_p [-]")

    @property
    def sampling_time(self) -> float:
        return self.preview_time / self.horizon

    @property
    def label(self) -> str:
        return f"Tp{self.preview_time:g}_Np{self.horizon}"


class PlannerConfig(BaseModel):
    """Planner configuration"""
    mode: PlannerMode = Field(PlannerMode.INTEGRAL, description="Planning approach")
    objective: ObjectiveSpec = Field(default_factory=ObjectiveSpec)
    preview: PreviewSetting = Field(default_factory=PreviewSetting)
    solver: SolverParams = Field(default_factory=SolverParams)
    warm_start: bool = Field(True, description="Seed each horizon solve with the shifted previous plan")
    init_smoothing: int = Field(5, ge=1, description="Moving-average window of the initial speed profile")
    init_jitter: float = Field(0.0, ge=0.0, description="Std-dev of random speed perturbation at init [m/s]")
    seed: int = Field(0, description="Seed for randomised initialisation")

    @property
    def sampling_time(self) -> float:
        return self.preview.sampling_time

    @model_validator(mode="after")
    def _check_preview(self) -> "PlannerConfig":
        if self.mode == PlannerMode.RECEDING_HORIZON and not 3.0 <= self.preview.preview_time <= 5.0:
            logger.warning(
                f"Preview time {self.preview.preview_time:g} s outside the recommended 3-5 s range"
            )
        return self


class ScenarioConfig(BaseModel):
    """Experiment definition loaded from a scenario file"""
    name: str = Field("scenario", description="Scenario name")
    road: str = Field(settings.DEFAULT_ROAD, description="Road file path")
    objectives: List[ObjectiveKind] = Field(default_factory=lambda: [ObjectiveKind.MS, ObjectiveKind.MA])
    weights: List[float] = Field(default_factory=list, description="W grid")
    rh_weights: List[float] = Field(default_factory=list, description="W values for receding-horizon runs; empty uses weights")
    modes: List[PlannerMode] = Field(default_factory=lambda: [PlannerMode.INTEGRAL])
    preview_grid: List[PreviewSetting] = Field(
        default_factory=lambda: [
            PreviewSetting(preview_time=tp, horizon=int(n)) for tp, n in settings.PREVIEW_GRID
        ]
    )
    longitudinal_filter: FilterSpec = Field(default_factory=lambda: default_filter(Axis.LONGITUDINAL))
    lateral_filter: FilterSpec = Field(default_factory=lambda: default_filter(Axis.LATERAL))
    matched_times: List[float] = Field(default_factory=list, description="Travel-time targets [s]")
    match_tolerance: float = Field(settings.MATCH_TOLERANCE, gt=0.0)
    bench_weight: Optional[float] = Field(None, ge=0.0, description="W used by timing benchmarks")
    telemetry: List[str] = Field(default_factory=list, description="Telemetry logs to score")
    solver: SolverParams = Field(default_factory=SolverParams, description="Integral solves")
    rh_solver: SolverParams = Field(default_factory=SolverParams.receding_horizon, description="Receding-horizon solves")
    output_dir: str = Field(settings.OUTPUT_DIR)
    workers: int = Field(settings.MAX_WORKERS, ge=1)
    seed: int = Field(0)

    @field_validator("weights")
    @classmethod
    def _check_weights(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("empty W grid")
        if any(w < 0 for w in value):
            raise ValueError("W must be nonnegative")
        return value

    @field_validator("objectives", "modes", "preview_grid")
    @classmethod
    def _check_nonempty(cls, value: list) -> list:
        if not value:
            raise ValueError("grid must not be empty")
        return value

    def planner_config(self, mode: PlannerMode, objective: ObjectiveKind, weight: float,
                       preview: Optional[PreviewSetting] = None) -> PlannerConfig:
        """Planner configuration for one grid point"""
        return PlannerConfig(
            mode=mode,
            objective=ObjectiveSpec(
                kind=objective,
                weight=weight,
                longitudinal_filter=self.longitudinal_filter,
                lateral_filter=self.lateral_filter,
            ),
            preview=preview or self.preview_grid[0],
            solver=self.rh_solver if mode == PlannerMode.RECEDING_HORIZON else self.solver,
            seed=self.seed,
        )


class PlanMetrics(BaseModel):
    """Comfort and efficiency metrics of a trajectory"""
    travel_time: float = Field(..., description="T [s]")
    d_ms: float = Field(..., description="Frequency-weighted energy incl. tail [m^2/s^3]")
    d_ma: float = Field(..., description="Raw acceleration energy [m^2/s^3]")
    squared_msdv: float = Field(..., description="Squared motion sickness dose value [m^2/s^3]")
    peak_ax: float = Field(..., description="Peak |a_x| [m/s^2]")
    peak_ay: float = Field(..., description="Peak |a_y| [m/s^2]")
    peak_combined: float = Field(..., description="Peak combined |a| [m/s^2]")
    d_ms_longitudinal: float = Field(0.0, description="Longitudinal share of D_MS")
    d_ms_lateral: float = Field(0.0, description="Lateral share of D_MS")
    d_ma_longitudinal: float = Field(0.0, description="Longitudinal share of D_MA")
    d_ma_lateral: float = Field(0.0, description="Lateral share of D_MA")


class StepTiming(BaseModel):
    """Computation-time sample of one receding-horizon solve"""
    step_index: int
    horizon: int
    preview_time: float
    sampling_time: float
    objective_kind: ObjectiveKind
    solve_ms: float
    iterations: int
    flagged: bool = False


class PulseShape(BaseModel):
    """sin^2 acceleration pulse, optionally carrying a sinusoid"""
    axis: Axis
    center: float = Field(..., description="Pulse centre time [s]")
    width: float = Field(..., gt=0.0, description="Pulse duration [s]")
    amplitude: float = Field(..., description="Peak amplitude [m/s^2]")
    frequency: Optional[float] = Field(None, gt=0.0, description="Carrier frequency [Hz]")


class DriveRecipe(BaseModel):
    """Recipe of a synthetic GPS/IMU drive calibrated to target metrics"""
    name: str = Field("synthetic-drive")
    duration: float = Field(73.8, gt=0.0, description="Drive duration [s]")
    imu_rate: float = Field(20.0, gt=0.0, description="IMU sampling rate [Hz]")
    gps_rate: float = Field(10.0, gt=0.0, description="GPS sampling rate [Hz]")
    initial_speed: float = Field(27.78, gt=0.0, description="Speed at t = 0 [m/s]")
    integration: DriveIntegration = Field(
        DriveIntegration.ODE, description="ode: continuous heading and speed; zoh: accelerations held per IMU step"
    )
    gaps: List[List[float]] = Field(default_factory=list, description="GPS outages [[t_start, t_end]]")
    gps_noise: float = Field(0.0, ge=0.0, description="GPS position noise std-dev [m]")
    seed: int = Field(0)
    target_d_ma: float = Field(259.8, gt=0.0)
    target_squared_msdv: float = Field(177.9, gt=0.0)
    tolerance: float = Field(1e-3, gt=0.0, description="Relative calibration tolerance")
    max_iterations: int = Field(12, ge=1)
    maneuvers: List[PulseShape] = Field(default_factory=list, description="Low-frequency pulses")
    bursts: List[PulseShape] = Field(default_factory=list, description="High-frequency bursts")
    notes: Dict[str, str] = Field(default_factory=dict)
