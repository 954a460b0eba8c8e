"""
Exception types raised by the planner package
"""


class ComfortPlannerError(Exception):
    """Base class for all package errors"""


class ConfigError(ComfortPlannerError):
    """Invalid scenario or planner configuration"""


class RoadFileError(ComfortPlannerError):
    """Road file could not be parsed or failed validation"""


class RoadGeometryError(ComfortPlannerError):
    """Invalid road geometry query"""


class KinematicsError(ComfortPlannerError):
    """Plan cannot be evaluated into segment kinematics"""


class FilterSpecError(ComfortPlannerError):
    """Invalid weighting filter parameters or step"""


class SolverError(ComfortPlannerError):
    """Optimisation could not be carried out"""


class TelemetryError(ComfortPlannerError):
    """Telemetry log is malformed or cannot be fused"""
