"""
Tests for road geometry, stations and road files
"""

import math

import numpy as np
import pytest

from comfort_planner.errors import RoadFileError, RoadGeometryError
from comfort_planner.models import RoadProfile
from comfort_planner.road import (
    RoadGeometry, build_stations, load_road, route_summary, save_road, station_to_global, stations_at,
)
from conftest import make_road


def test_bundled_route_summary(bundled_road):
    """Test the bundled route length and turn counts"""
    summary = route_summary(bundled_road)
    assert summary["total_length"] == pytest.approx(919.663, abs=1e-3)
    assert summary["n_arcs"] == 11
    assert summary["n_left"] == 4
    assert summary["n_right"] == 7
    assert summary["roundabout_sections"] == 2


def test_bundled_route_stations(bundled_road):
    """Test nominal stations cover the route and end exactly at its end"""
    stations = build_stations(bundled_road)
    assert len(stations) == 185
    assert stations.s[0] == 0.0
    assert stations.s[-1] == pytest.approx(bundled_road.total_length, abs=1e-12)
    assert np.all(np.diff(stations.s) > 0.0)
    assert np.all(np.diff(stations.s) <= 5.0 + 1e-9)


def test_straight_line_stations(straight_road):
    """Test stations on a straight line"""
    stations = stations_at(straight_road, np.array([0.0, 25.0, 100.0]))
    np.testing.assert_allclose(stations.center, [[0.0, 0.0], [25.0, 0.0], [100.0, 0.0]], atol=1e-12)
    np.testing.assert_allclose(stations.tangent, np.tile([1.0, 0.0], (3, 1)), atol=1e-12)
    np.testing.assert_allclose(stations.normal, np.tile([0.0, 1.0], (3, 1)), atol=1e-12)


def test_quarter_arc_stations(quarter_turn_road):
    """Test the end of a 90 degree left arc of radius 50 m"""
    arc_end = 50.0 + 25.0 * math.pi
    stations = stations_at(quarter_turn_road, np.array([arc_end, arc_end + 50.0]))
    np.testing.assert_allclose(stations.center[0], [100.0, 50.0], atol=1e-9)
    np.testing.assert_allclose(stations.tangent[0], [0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(stations.normal[0], [-1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(stations.center[1], [100.0, 100.0], atol=1e-9)


def test_arc_midpoint_lies_on_circle(quarter_turn_road):
    """Test every arc station is 50 m from the arc centre"""
    s = np.linspace(50.0, 50.0 + 25.0 * math.pi, 41)
    stations = stations_at(quarter_turn_road, s)
    radius = np.hypot(stations.center[:, 0] - 50.0, stations.center[:, 1] - 50.0)
    np.testing.assert_allclose(radius, 50.0, atol=1e-9)


def test_geometry_is_continuous(bundled_geometry):
    """Test position and heading are continuous across primitive boundaries"""
    step = 0.1
    s = np.arange(0.0, bundled_geometry.length, step)
    stations = bundled_geometry.stations_at(s)
    distance = np.hypot(*np.diff(stations.center, axis=0).T)
    np.testing.assert_allclose(distance, step, atol=1e-4)
    turn = np.abs(np.arcsin(np.clip(np.cross(stations.tangent[:-1], stations.tangent[1:]), -1.0, 1.0)))
    assert turn.max() <= step * 0.0625 + 1e-9


def test_extrapolation_past_end(straight_road):
    """Test stations beyond the route end continue straight"""
    geometry = RoadGeometry(straight_road)
    stations = geometry.stations_at(np.array([110.0]))
    np.testing.assert_allclose(stations.center[0], [110.0, 0.0], atol=1e-12)


def test_extrapolation_past_arc_end():
    """Test a route ending in an arc extends along the final tangent"""
    road = make_road([("arc", 0.5 * math.pi * 20.0, 1.0 / 20.0)])
    geometry = RoadGeometry(road)
    stations = geometry.stations_at(np.array([geometry.length + 10.0]))
    np.testing.assert_allclose(stations.center[0], [20.0, 30.0], atol=1e-9)
    np.testing.assert_allclose(stations.tangent[0], [0.0, 1.0], atol=1e-12)


def test_negative_arclength_rejected(straight_road):
    """Test negative station arclengths raise"""
    with pytest.raises(RoadGeometryError):
        stations_at(straight_road, np.array([-1.0]))


def test_empty_road_rejected():
    """Test geometry of a road without primitives raises"""
    road = RoadProfile(y_min=-1.0, y_max=1.0, speed_min=1.0, speed_max=10.0, entry_speed=5.0, exit_speed=5.0)
    with pytest.raises(RoadGeometryError, match="no primitives"):
        RoadGeometry(road)


def test_speed_bounds(bundled_geometry, bundled_road):
    """Test piecewise speed bounds and the exit speed past the end"""
    low, high = bundled_geometry.speed_bounds(np.array([0.0, 210.0, bundled_geometry.length,
                                                        bundled_geometry.length + 5.0]))
    np.testing.assert_allclose(low[:3], 1.0)
    np.testing.assert_allclose(high[:3], [100.0 / 3.6, 50.0 / 3.6, 80.0 / 3.6])
    assert low[3] == high[3] == pytest.approx(bundled_road.exit_speed)


def test_station_to_global(quarter_turn_road):
    """Test a positive offset moves the waypoint to the left"""
    station = stations_at(quarter_turn_road, np.array([10.0]))[0]
    np.testing.assert_allclose(station_to_global(station, 0.5), [10.0, 0.5])
    np.testing.assert_allclose(station_to_global(station, -0.5), [10.0, -0.5])


def test_load_road_missing_primitives(tmp_path):
    """Test a road file with no primitives is rejected"""
    path = tmp_path / "empty.road"
    path.write_text("name: empty\ny_min: -1\ny_max: 1\nprimitives: []\n", encoding="utf-8")
    with pytest.raises(RoadFileError, match="no primitives"):
        load_road(path)


def test_load_road_names_bad_primitive(tmp_path):
    """Test validation errors name the offending primitive"""
    path = tmp_path / "bad.road"
    path.write_text(
        "name: bad\ny_min: -1\ny_max: 1\nspeed_min: 1\nspeed_max: 10\nentry_speed: 5\nexit_speed: 5\n"
        "primitives:\n"
        "- {kind: line, length: 10}\n"
        "- {kind: arc, length: 10, curvature: 0.0}\n",
        encoding="utf-8",
    )
    with pytest.raises(RoadFileError, match="primitive 1"):
        load_road(path)


def test_load_road_reports_line(tmp_path):
    """Test malformed YAML reports the line number"""
    path = tmp_path / "broken.road"
    path.write_text("name: broken\n\tprimitives: 1\n", encoding="utf-8")
    with pytest.raises(RoadFileError, match="line 2"):
        load_road(path)


def test_load_road_missing_file(tmp_path):
    """Test a missing road file raises a road file error"""
    with pytest.raises(RoadFileError):
        load_road(tmp_path / "nope.road")


def test_save_and_load_road(tmp_path, bundled_road):
    """Test a saved road loads back unchanged"""
    path = tmp_path / "copy.road"
    save_road(bundled_road, path)
    assert load_road(path) == bundled_road
