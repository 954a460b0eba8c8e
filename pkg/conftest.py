"""
Shared fixtures for the planner tests
"""

import math
from pathlib import Path

import numpy as np
import pytest

from comfort_planner.models import PrimitiveKind, RoadPrimitive, RoadProfile
from comfort_planner.road import RoadGeometry, load_road

ROOT = Path(__file__).parent
BUNDLED_ROAD = ROOT / "routes" / "waarder_a12.road"


def make_road(primitives, **fields) -> RoadProfile:
    """Road from (kind, length, curvature) tuples with test defaults"""
    defaults = dict(
        name="test-road", y_min=-0.9, y_max=0.9, d_nom=5.0,
        speed_min=1.0, speed_max=15.0, entry_speed=10.0, exit_speed=10.0,
    )
    defaults.update(fields)
    return RoadProfile(
        primitives=[
            RoadPrimitive(kind=PrimitiveKind(kind), length=length, curvature=curvature)
            for kind, length, curvature in primitives
        ],
        **defaults,
    )


@pytest.fixture
def straight_road() -> RoadProfile:
    return make_road([("line", 100.0, 0.0)])


@pytest.fixture
def quarter_turn_road() -> RoadProfile:
    """50 m straight, 90 degree left arc of radius 50 m, 50 m straight"""
    return make_road([
        ("line", 50.0, 0.0),
        ("arc", 0.5 * math.pi * 50.0, 1.0 / 50.0),
        ("line", 50.0, 0.0),
    ])


@pytest.fixture(scope="session")
def bundled_road() -> RoadProfile:
    return load_road(BUNDLED_ROAD)


@pytest.fixture(scope="session")
def bundled_geometry(bundled_road) -> RoadGeometry:
    return RoadGeometry(bundled_road)


@pytest.fixture
def in_root(monkeypatch):
    """Run with the repository root as working directory"""
    monkeypatch.chdir(ROOT)
    return ROOT


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
