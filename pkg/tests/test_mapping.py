import math

import numpy as np
import pytest

from fleetstation import mapping
from fleetstation.geometry import Pose2D, Transform2D
from fleetstation.mapping import (
    FREE,
    L_FREE,
    L_MAX,
    L_OCC,
    OCCUPIED,
    UNKNOWN,
    OccupancyGrid,
    integrate_scan,
    probability_grid,
    serialize_grid,
    deserialize_grid,
)
from fleetstation.sim import LaserScan


def make_grid(w=80, h=80, res=0.05):
    return OccupancyGrid(w, h, res, Transform2D.identity())


def single_beam(rng, range_max=8.0):
    return LaserScan(0.0, 0.01, range_max, np.array([rng]), 0)


def logistic(x):
    return 1.0 / (1.0 + math.exp(-x))


def test_single_beam_endpoint_and_free_cells():
    grid = make_grid()
    pose = Pose2D(1.0, 1.0, 0.0)
    grid = integrate_scan(grid, pose, single_beam(1.0))
    ec, er = grid.world_to_cell(2.0 - 0.025, 1.0)
    p = grid.probability()
    assert p[er, ec] == pytest.approx(logistic(L_OCC))
    assert logistic(L_OCC) == pytest.approx(0.7)
    mc, mr = grid.world_to_cell(1.5, 1.0)
    assert p[mr, mc] == pytest.approx(logistic(L_FREE))
    assert logistic(L_FREE) == pytest.approx(0.4)


def test_repeated_beam_clamps():
    grid = make_grid()
    pose = Pose2D(1.0, 1.0, 0.0)
    for _ in range(10):
        grid = integrate_scan(grid, pose, single_beam(1.0))
    ec, er = grid.world_to_cell(2.0 - 0.025, 1.0)
    expected = logistic(min(10 * L_OCC, L_MAX))
    assert grid.probability()[er, ec] == pytest.approx(expected)


def test_empty_scan_no_change():
    grid = make_grid()
    before = grid.log_odds.copy()
    scan = LaserScan(0.0, 0.01, 0.0, np.array([np.inf, np.inf]), 0)
    grid = integrate_scan(grid, Pose2D(1, 1, 0), scan)
    assert np.array_equal(grid.log_odds, before)


def test_probability_grid_thresholds():
    grid = make_grid(4, 1)
    grid.log_odds[0, 0] = 0.0
    grid.log_odds[0, 1] = math.log(0.7 / 0.3)  # p = 0.7
    grid.log_odds[0, 2] = math.log(0.3 / 0.7)  # p = 0.3
    grid.log_odds[0, 3] = math.log(0.5 / 0.5)
    tern = probability_grid(grid)
    assert tern[0, 0] == UNKNOWN
    assert tern[0, 1] == OCCUPIED
    assert tern[0, 2] == FREE
    assert tern[0, 3] == UNKNOWN


def test_monotonicity():
    grid = make_grid()
    pose = Pose2D(1, 1, 0)
    prev_occ = -1.0
    prev_free = 1.0
    for _ in range(5):
        grid = integrate_scan(grid, pose, single_beam(1.0))
        p = grid.probability()
        ec, er = grid.world_to_cell(2.0 - 0.025, 1.0)
        mc, mr = grid.world_to_cell(1.5, 1.0)
        assert p[er, ec] >= prev_occ
        assert p[mr, mc] <= prev_free
        prev_occ, prev_free = p[er, ec], p[mr, mc]


def test_negation_returns_to_prior():
    grid = make_grid()
    pose = Pose2D(1, 1, 0.3)
    scan = LaserScan(-0.5, 0.25, 8.0, np.array([1.0, 2.0, np.inf, 0.7, 1.4]), 0)
    grid = integrate_scan(grid, pose, scan)
    grid = integrate_scan(grid, pose, scan, l_occ=-L_OCC, l_free=-L_FREE)
    assert np.allclose(grid.log_odds, 0.0, atol=1e-12)


def test_auto_grow_preserves_world_content():
    grid = make_grid(16, 16)
    pose = Pose2D(0.2, 0.2, 0.0)
    grid = integrate_scan(grid, pose, single_beam(3.0))  # endpoint beyond 16 cells
    assert grid.width > 16
    ec, er = grid.world_to_cell(3.2 - 0.025, 0.2)
    assert grid.probability()[er, ec] > 0.5


def test_pose_outside_without_autogrow():
    grid = make_grid(16, 16)
    with pytest.raises(mapping.PoseOutsideGrid):
        integrate_scan(grid, Pose2D(-5, -5, 0), single_beam(1.0), auto_grow=False)


def test_convergence_in_closed_room():
    # 4 m square room, robot spinning in the middle
    res = 0.05
    n = 80
    occ = np.zeros((n, n), dtype=bool)
    occ[0, :] = occ[-1, :] = True
    occ[:, 0] = occ[:, -1] = True

    from fleetstation.sim import WorldModel, RobotBody, scan as sim_scan
    from fleetstation.geometry import Twist2D

    robot = RobotBody("r1", Pose2D(2.0, 2.0, 0.0), Pose2D(2.0, 2.0, 0.0))
    world = WorldModel(occ, res, robots=[robot], odom_noise=False)

    grid = make_grid(n, n, res)
    for k in range(36):
        robot.pose_true = Pose2D(2.0, 2.0, k * 2 * math.pi / 36)
        grid = integrate_scan(grid, robot.pose_true, sim_scan(world, "r1"))

    tern = probability_grid(grid)
    # compare against ground truth over in-range cells (everything in a 4 m room)
    correct = 0
    total = 0
    for r in range(n):
        for c in range(n):
            gx, gy = (c + 0.5) * res, (r + 0.5) * res
            if math.hypot(gx - 2.0, gy - 2.0) > world.lidar_range:
                continue
            cc, rr = grid.world_to_cell(gx, gy)
            if not grid.in_bounds(cc, rr):
                continue
            total += 1
            want = OCCUPIED if occ[r, c] else FREE
            if tern[rr, cc] == want:
                correct += 1
    assert correct / total >= 0.95


def test_serialization_roundtrip_bit_exact():
    grid = make_grid(32, 16, 0.1)
    grid = integrate_scan(grid, Pose2D(0.5, 0.5, 0.2), single_beam(1.0))
    buf = serialize_grid(grid)
    cells, res, origin = deserialize_grid(buf)
    assert cells.shape == (grid.height, grid.width)
    assert res == grid.resolution
    assert origin == grid.origin
    assert np.array_equal(cells, probability_grid(grid))
    assert serialize_grid(grid) == buf
