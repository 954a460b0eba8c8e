"""
Configuration settings for the comfort motion planner
"""

import math
from typing import List

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings"""

    PROJECT_NAME: str = "Comfort Motion Planner"
    VERSION: str = "1.0.0"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # File Paths
    ROUTES_DIR: str = "routes"
    SCENARIOS_DIR: str = "scenarios"
    SAMPLES_DIR: str = "samples"
    DEFAULT_ROAD: str = "routes/waarder_a12.road"
    DEFAULT_SCENARIO: str = "scenarios/default.yaml"
    OUTPUT_DIR: str = "results"

    # Frequency weighting (0.0315-0.2 Hz band on both axes, fore-aft less sensitive)
    LATERAL_TAU1: float = 1.0 / (2.0 * math.pi * 0.0315)
    LATERAL_TAU2: float = 1.0 / (2.0 * math.pi * 0.2)
    LONGITUDINAL_TAU1: float = 1.0 / (2.0 * math.pi * 0.0315)
    LONGITUDINAL_TAU2: float = 1.0 / (2.0 * math.pi * 0.2)
    LATERAL_PEAK_GAIN: float = 1.0
    LONGITUDINAL_PEAK_GAIN: float = 0.55
    TAIL_STEPS: int = 150
    TAIL_STEP_TIME: float = 0.2

    # Kinematics
    DEGENERATE_SEGMENT_EPS: float = 1e-6
    DEFAULT_STATION_INTERVAL: float = 5.0

    # Solver
    MAX_ITERATIONS: int = 3000
    GRADIENT_TOLERANCE: float = 1e-6
    STEP_TOLERANCE: float = 1e-10
    FUNCTION_TOLERANCE: float = 1e-12
    LBFGS_HISTORY: int = 10

    # Receding-horizon inner solves
    RH_MAX_ITERATIONS: int = 1500
    RH_GRADIENT_TOLERANCE: float = 1e-5
    RH_FUNCTION_TOLERANCE: float = 1e-9

    # Travel-time matching
    MATCH_TOLERANCE: float = 0.2
    MATCH_MAX_ITERATIONS: int = 30
    W_SEARCH_MIN: float = 1e-3
    W_SEARCH_MAX: float = 1e3

    # Default W sweep (log grid)
    W_GRID_MIN: float = 0.05
    W_GRID_MAX: float = 50.0
    W_GRID_POINTS: int = 15

    # Telemetry fusion
    KF_PROCESS_NOISE: float = 0.2
    KF_GPS_SIGMA: float = 0.5
    KF_INIT_WINDOW: float = 1.0
    LOW_SPEED_THRESHOLD: float = 0.5

    # Performance
    MAX_WORKERS: int = 4

    # Receding-horizon preview grid (T_p [s], N_p [-])
    PREVIEW_GRID: List[List[float]] = [
        [3, 30], [3, 15], [3, 6],
        [4, 40], [4, 20], [4, 8],
        [5, 50], [5, 25], [5, 10],
    ]

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="COMFORT_",
        case_sensitive=True,
        extra="ignore",
    )


# Global settings instance
settings = Settings()
