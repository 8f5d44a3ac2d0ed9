import math

import numpy as np
import pytest

from fleetstation import mapping
from fleetstation.errors import BandSevered, GoalInObstacle, NoPath
from fleetstation.geometry import Pose2D
from fleetstation.nav import (
    LocalCommand,
    PathPlan,
    TernaryMap,
    deform_band,
    path_length,
    plan_global,
    track,
)
from fleetstation.sim import LaserScan


def free_map(n=40, res=0.1):
    cells = np.full((n, n), mapping.FREE, dtype=np.uint8)
    return cells, res


def walled_map(n=100, res=0.05):
    cells = np.full((n, n), mapping.FREE, dtype=np.uint8)
    cells[0, :] = cells[-1, :] = mapping.OCCUPIED
    cells[:, 0] = cells[:, -1] = mapping.OCCUPIED
    return cells


def clear_scan(n=36, rng=8.0):
    return LaserScan(-math.pi, 2 * math.pi / n, rng, np.full(n, np.inf), 0)


def scan_with_forward_range(r, n=36, rng=8.0):
    ranges = np.full(n, np.inf)
    ranges[n // 2] = r  # beam at angle 0
    return LaserScan(-math.pi, 2 * math.pi / n, rng, ranges, 0)


def test_plan_diagonal_cost_small_grid():
    cells = np.full((3, 3), mapping.FREE, dtype=np.uint8)
    tmap = TernaryMap(cells, 1.0)
    plan = plan_global(tmap, Pose2D(0.5, 0.5, 0), Pose2D(2.5, 2.5, 0), robot_radius=0.0)
    assert path_length(plan) == pytest.approx(2 * math.sqrt(2), abs=1e-9)


def test_plan_goal_in_obstacle():
    cells = walled_map()
    tmap = TernaryMap(cells, 0.05)
    with pytest.raises(GoalInObstacle):
        plan_global(tmap, Pose2D(2.5, 2.5, 0), Pose2D(0.01, 0.01, 0))


def test_plan_sealed_room_no_path():
    cells = walled_map()
    cells[40, :] = mapping.OCCUPIED  # full dividing wall
    tmap = TernaryMap(cells, 0.05)
    with pytest.raises(NoPath):
        plan_global(tmap, Pose2D(2.5, 1.0, 0), Pose2D(2.5, 4.0, 0))


def test_plan_densified_spacing_and_goal_heading():
    cells = walled_map()
    tmap = TernaryMap(cells, 0.05)
    goal = Pose2D(4.0, 4.0, 1.0)
    plan = plan_global(tmap, Pose2D(1.0, 1.0, 0), goal)
    for a, b in zip(plan.waypoints, plan.waypoints[1:]):
        assert math.hypot(b.x - a.x, b.y - a.y) <= 0.5 + 1e-9
    assert plan.waypoints[-1].theta == pytest.approx(1.0)
    assert plan.waypoints[-1].x == pytest.approx(4.0)


def test_plan_unknown_cost_prefers_free():
    # two corridors: direct one unknown, detour free; widths equal
    cells = np.full((9, 30), mapping.FREE, dtype=np.uint8)
    cells[4, 5:25] = mapping.UNKNOWN
    tmap = TernaryMap(cells, 1.0)
    plan = plan_global(
        tmap, Pose2D(0.5, 4.5, 0), Pose2D(29.5, 4.5, 0), robot_radius=0.0
    )
    # with 3x unknown cost the planner detours around the unknown strip
    rows = {tmap.world_to_cell(p.x, p.y)[1] for p in plan.waypoints}
    assert rows != {4}


def test_band_straight_path_unchanged_in_open_space():
    cells, res = free_map(60, 0.1)
    tmap = TernaryMap(cells, res)
    wps = [Pose2D(1.0 + 0.3 * i, 3.0, 0) for i in range(12)]
    plan = PathPlan(wps)
    out = deform_band(plan, tmap)
    for a, b in zip(plan.waypoints, out.waypoints):
        assert math.hypot(a.x - b.x, a.y - b.y) <= 0.01 + 1e-9


def test_band_pushes_away_from_wall():
    cells = np.full((80, 80), mapping.FREE, dtype=np.uint8)
    cells[40, :] = mapping.OCCUPIED  # wall along y = 2.0..2.05 at res 0.05
    tmap = TernaryMap(cells, 0.05)
    wall_y = 40 * 0.05 + 0.025  # wall cell center
    wps = [Pose2D(0.5 + 0.25 * i, wall_y - 0.15, 0) for i in range(12)]
    out = deform_band(PathPlan(wps), tmap)
    for p in out.waypoints[1:-1]:
        assert wall_y - 0.025 - p.y >= 0.25 - 0.05  # cell-quantized clearance


def test_band_never_decreases_clearance():
    cells = np.full((80, 80), mapping.FREE, dtype=np.uint8)
    cells[40, 20:60] = mapping.OCCUPIED
    tmap = TernaryMap(cells, 0.05)
    wps = [Pose2D(0.5 + 0.3 * i, 1.6, 0) for i in range(10)]
    before = min(tmap.clearance_at(p.x, p.y) for p in wps)
    out = deform_band(PathPlan(wps), tmap)
    after = min(tmap.clearance_at(p.x, p.y) for p in out.waypoints)
    assert after >= before - 1e-9


def test_band_severed_in_narrow_gap():
    cells = np.full((80, 80), mapping.OCCUPIED, dtype=np.uint8)
    cells[38:43, :] = mapping.FREE  # 0.25 m corridor
    tmap = TernaryMap(cells, 0.05)
    y = 40 * 0.05
    wps = [Pose2D(0.5 + 0.3 * i, y, 0) for i in range(10)]
    with pytest.raises(BandSevered):
        deform_band(PathPlan(wps), tmap, robot_radius=0.2)


def test_track_reached():
    plan = PathPlan([Pose2D(1, 1, 0.5)])
    cmd = track(plan, Pose2D(1.05, 1.0, 0.55), clear_scan())
    assert cmd.status == "reached"
    assert cmd.twist.linear == 0 and cmd.twist.angular == 0


def test_track_blocked():
    plan = PathPlan([Pose2D(5, 0, 0)])
    cmd = track(plan, Pose2D(0, 0, 0), scan_with_forward_range(0.25))
    assert cmd.status == "blocked"
    assert cmd.twist.linear == 0


def test_track_straight_segment():
    plan = PathPlan([Pose2D(x, 0, 0) for x in (0.0, 0.5, 1.0, 1.5, 2.0)])
    cmd = track(plan, Pose2D(1.0, 0, 0), clear_scan())
    assert cmd.status == "tracking"
    assert cmd.twist.linear > 0
    assert abs(cmd.twist.angular) < 1e-6


def test_track_slows_near_obstacle():
    plan = PathPlan([Pose2D(5, 0, 0)])
    fast = track(plan, Pose2D(0, 0, 0), clear_scan())
    slow = track(plan, Pose2D(0, 0, 0), scan_with_forward_range(0.6))
    assert 0 < slow.twist.linear < fast.twist.linear
