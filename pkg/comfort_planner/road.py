"""
Lane centerline geometry: primitive chaining, stations and road files
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import yaml
from pydantic import ValidationError

from .errors import RoadFileError, RoadGeometryError
from .models import PrimitiveKind, RoadProfile

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Positions closer than this to the route end count as the route end
END_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Station:
    """Point on the lane centerline with its local frame"""
    s: float
    position: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True)
class Stations:
    """Array-of-stations view; row k is one station"""
    s: np.ndarray
    center: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray

    def __len__(self) -> int:
        return len(self.s)

    def __getitem__(self, index: int) -> Station:
        return Station(
            s=float(self.s[index]),
            position=self.center[index],
            tangent=self.tangent[index],
            normal=self.normal[index],
        )

    def offset(self, y: np.ndarray) -> np.ndarray:
        """Global waypoint positions for lateral offsets y"""
        return self.center + np.asarray(y, dtype=float)[:, None] * self.normal


class RoadGeometry:
    """Chained primitives of a road profile, evaluated analytically"""

    def __init__(self, road: RoadProfile):
        if not road.primitives:
            raise RoadGeometryError("no primitives")
        self.road = road
        count = len(road.primitives)
        lengths = np.array([p.length for p in road.primitives])
        self.boundaries = np.concatenate(([0.0], np.cumsum(lengths)))
        self.length = float(self.boundaries[-1])

        # Start pose of every primitive plus a virtual straight after the end
        poses = np.zeros((count + 1, 3))
        poses[0] = (road.start_x, road.start_y, road.start_heading)
        for index, primitive in enumerate(road.primitives):
            poses[index + 1] = _end_pose(poses[index], primitive.length, primitive.curvature)
        self.poses = poses
        self.curvatures = np.array([p.curvature for p in road.primitives] + [0.0])
        self.speed_min = np.array([p.speed_min or road.speed_min for p in road.primitives])
        self.speed_max = np.array([p.speed_max or road.speed_max for p in road.primitives])

    def stations_at(self, s_values: np.ndarray) -> Stations:
        """Stations at arbitrary arclengths; beyond the end the final pose is extended straight"""
        s = np.atleast_1d(np.asarray(s_values, dtype=float))
        if np.any(s < 0.0):
            raise RoadGeometryError("station arclength must be nonnegative")

        index = np.searchsorted(self.boundaries, s, side="right") - 1
        index = np.clip(index, 0, len(self.poses) - 1)
        u = s - self.boundaries[index]
        x0, y0, heading0 = self.poses[index].T
        curvature = self.curvatures[index]
        heading = heading0 + curvature * u

        is_arc = curvature != 0.0
        safe = np.where(is_arc, curvature, 1.0)
        dx = np.where(is_arc, (np.sin(heading) - np.sin(heading0)) / safe, u * np.cos(heading0))
        dy = np.where(is_arc, (np.cos(heading0) - np.cos(heading)) / safe, u * np.sin(heading0))

        tangent = np.column_stack((np.cos(heading), np.sin(heading)))
        normal = np.column_stack((-tangent[:, 1], tangent[:, 0]))
        return Stations(s=s, center=np.column_stack((x0 + dx, y0 + dy)), tangent=tangent, normal=normal)

    def nominal_arclengths(self, d_nom: float = None) -> np.ndarray:
        """s = 0, d_nom, 2 d_nom, ... and the route end"""
        d_nom = d_nom or self.road.d_nom
        count = int(np.floor(self.length / d_nom + 1e-9))
        s = np.arange(count + 1) * d_nom
        if self.length - s[-1] > 1e-6:
            s = np.append(s, self.length)
        else:
            s[-1] = self.length
        return s

    def build_stations(self, d_nom: float = None) -> Stations:
        return self.stations_at(self.nominal_arclengths(d_nom))

    def speed_bounds(self, s_values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Piecewise-constant speed bounds; past the route end both equal the exit speed"""
        s = np.atleast_1d(np.asarray(s_values, dtype=float))
        index = np.searchsorted(self.boundaries[1:-1], s, side="right")
        low = self.speed_min[index].copy()
        high = self.speed_max[index].copy()
        beyond = s > self.length + END_TOLERANCE
        low[beyond] = self.road.exit_speed
        high[beyond] = self.road.exit_speed
        return low, high


def _end_pose(pose: np.ndarray, length: float, curvature: float) -> np.ndarray:
    x, y, heading = pose
    if curvature == 0.0:
        return np.array([x + length * np.cos(heading), y + length * np.sin(heading), heading])
    end_heading = heading + curvature * length
    return np.array([
        x + (np.sin(end_heading) - np.sin(heading)) / curvature,
        y + (np.cos(heading) - np.cos(end_heading)) / curvature,
        end_heading,
    ])


def build_stations(road: RoadProfile) -> Stations:
    """Stations at the nominal interval along the whole route"""
    return RoadGeometry(road).build_stations()


def stations_at(road: RoadProfile, s_values: np.ndarray) -> Stations:
    return RoadGeometry(road).stations_at(s_values)


def station_to_global(station: Station, y: float) -> np.ndarray:
    """Waypoint of a station at lateral offset y (positive to the left)"""
    return station.position + y * station.normal


def route_summary(road: RoadProfile) -> Dict[str, Any]:
    """Turn and section counts of a route"""
    arcs = [p for p in road.primitives if p.kind == PrimitiveKind.ARC]
    sections = {p.section for p in road.primitives if p.section and p.section.startswith("roundabout")}
    return {
        "total_length": road.total_length,
        "n_arcs": len(arcs),
        "n_left": sum(1 for p in arcs if p.curvature > 0),
        "n_right": sum(1 for p in arcs if p.curvature < 0),
        "roundabout_sections": len(sections),
    }


def load_road(path: PathLike) -> RoadProfile:
    """Load a road file (YAML)"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise RoadFileError(f"{path}: cannot read road file: {e}") from e

    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" line {mark.line + 1}" if mark is not None else ""
        raise RoadFileError(f"{path}:{where} malformed road file: {e}") from e

    if not isinstance(data, dict):
        raise RoadFileError(f"{path}: road file must be a mapping of fields")
    if not data.get("primitives"):
        raise RoadFileError(f"{path}: no primitives")

    try:
        road = RoadProfile.model_validate(data)
    except ValidationError as e:
        raise RoadFileError(f"{path}: {_describe_errors(e)}") from e

    logger.info(f"Loaded road '{road.name}' with {len(road.primitives)} primitives ({road.total_length:.1f} m)")
    return road


def save_road(road: RoadProfile, path: PathLike) -> None:
    """Write a road file; floats are written with round-trip precision"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = road.model_dump(mode="json", exclude_none=True)
    path.write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")
    logger.info(f"Saved road '{road.name}' to {path}")


def _describe_errors(error: ValidationError) -> str:
    messages = []
    for item in error.errors():
        loc = list(item["loc"])
        if len(loc) >= 2 and loc[0] == "primitives":
            field = ".".join(str(part) for part in loc[2:]) or "record"
            messages.append(f"primitive {loc[1]}: {field}: {item['msg']}")
        else:
            field = ".".join(str(part) for part in loc) or "road"
            messages.append(f"{field}: {item['msg']}")
    return "; ".join(messages)
