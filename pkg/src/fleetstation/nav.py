"""Global planning, elastic-band relaxation, and pure-pursuit tracking.

Planning runs on a ternary raster (merged map); the band deforms paths away
from obstacles; tracking turns the band into velocity commands with scan-based
slow-down and a hard blocked threshold.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import mapping
from .errors import BandSevered, GoalInObstacle, NoPath
from .geometry import Pose2D, Twist2D, normalize_angle

INFLATION_MARGIN = 0.1  # added to robot radius
UNKNOWN_COST = 3.0
WAYPOINT_SPACING = 0.5
GOAL_TOL_XY = 0.1
GOAL_TOL_THETA = math.radians(10.0)

BAND_ALPHA = 0.4  # smoothness pull
BAND_BETA = 0.12  # obstacle repulsion, meters of push at zero clearance
BAND_D_INFLUENCE = 0.4
BAND_ITERATIONS = 50
BAND_CONVERGENCE = 0.01

LOOKAHEAD = 0.4
SLOWDOWN_RANGE = 1.0
BLOCKED_RANGE = 0.3
MAX_LINEAR = 0.6
MAX_ANGULAR = 1.5


@dataclass
class PathPlan:
    waypoints: list[Pose2D]
    source: str = "planned"  # or "drawn"
    goal_tolerance_xy: float = GOAL_TOL_XY
    goal_tolerance_theta: float = GOAL_TOL_THETA


@dataclass
class LocalCommand:
    twist: Twist2D
    status: str  # tracking | blocked | reached


class TernaryMap:
    """Ternary raster plus geometry, with cached inflation/distance fields."""

    def __init__(self, cells: np.ndarray, resolution: float, origin_xy=(0.0, 0.0)):
        self.cells = cells
        self.resolution = resolution
        self.origin_xy = origin_xy
        occupied = cells == mapping.OCCUPIED
        # distance (meters) from each cell center to the nearest occupied cell
        if occupied.any():
            self.obstacle_distance = (
                ndimage.distance_transform_edt(~occupied) * resolution
            )
        else:
            self.obstacle_distance = np.full(cells.shape, 1e9)

    @classmethod
    def from_grid(cls, grid: mapping.OccupancyGrid) -> "TernaryMap":
        return cls(
            mapping.probability_grid(grid),
            grid.resolution,
            (grid.origin.tx, grid.origin.ty),
        )

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        ox, oy = self.origin_xy
        return (
            math.floor((x - ox) / self.resolution),
            math.floor((y - oy) / self.resolution),
        )

    def cell_to_world(self, col: int, row: int) -> tuple[float, float]:
        ox, oy = self.origin_xy
        return (ox + (col + 0.5) * self.resolution, oy + (row + 0.5) * self.resolution)

    def in_bounds(self, col: int, row: int) -> bool:
        h, w = self.cells.shape
        return 0 <= col < w and 0 <= row < h

    def clearance_at(self, x: float, y: float) -> float:
        c, r = self.world_to_cell(x, y)
        if not self.in_bounds(c, r):
            return 0.0
        return float(self.obstacle_distance[r, c])

    def is_occupied_at(self, x: float, y: float) -> bool:
        c, r = self.world_to_cell(x, y)
        return self.in_bounds(c, r) and self.cells[r, c] == mapping.OCCUPIED


def _densify(points: list[tuple[float, float]], spacing: float) -> list[tuple[float, float]]:
    if not points:
        return []
    out = [points[0]]
    for p in points[1:]:
        last = out[-1]
        d = math.hypot(p[0] - last[0], p[1] - last[1])
        if d > spacing:
            n = int(math.ceil(d / spacing))
            for k in range(1, n):
                out.append(
                    (last[0] + (p[0] - last[0]) * k / n, last[1] + (p[1] - last[1]) * k / n)
                )
        out.append(p)
    return out


def plan_global(
    tmap: TernaryMap,
    start: Pose2D,
    goal: Pose2D,
    robot_radius: float = 0.15,
) -> PathPlan:
    """8-connected A* over the inflated raster, densified to <= 0.5 m spacing.

    Unknown cells cost 3x; ties break toward lower row then lower column so
    replays are deterministic.
    """
    inflation = robot_radius + INFLATION_MARGIN
    blocked = tmap.obstacle_distance <= inflation
    h, w = tmap.cells.shape

    sc, sr = tmap.world_to_cell(start.x, start.y)
    gc, gr = tmap.world_to_cell(goal.x, goal.y)
    if not tmap.in_bounds(gc, gr) or blocked[gr, gc]:
        raise GoalInObstacle(f"goal ({goal.x:.2f}, {goal.y:.2f}) inside inflated obstacle")
    if not tmap.in_bounds(sc, sr) or blocked[sr, sc]:
        raise NoPath("start not in free space after inflation")

    def hcost(c, r):
        dc, dr = abs(c - gc), abs(r - gr)
        return max(dc, dr) + (math.sqrt(2) - 1) * min(dc, dr)

    neighbors = [
        (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
        (1, 1, math.sqrt(2)), (1, -1, math.sqrt(2)),
        (-1, 1, math.sqrt(2)), (-1, -1, math.sqrt(2)),
    ]
    g_score = {(sc, sr): 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    open_heap = [(hcost(sc, sr), sr, sc)]
    closed = np.zeros((h, w), dtype=bool)
    while open_heap:
        _, r, c = heapq.heappop(open_heap)
        if closed[r, c]:
            continue
        closed[r, c] = True
        if (c, r) == (gc, gr):
            break
        base = g_score[(c, r)]
        for dc, dr, cost in neighbors:
            nc, nr = c + dc, r + dr
            if not (0 <= nc < w and 0 <= nr < h) or blocked[nr, nc] or closed[nr, nc]:
                continue
            mult = UNKNOWN_COST if tmap.cells[nr, nc] == mapping.UNKNOWN else 1.0
            cand = base + cost * mult
            if cand < g_score.get((nc, nr), math.inf):
                g_score[(nc, nr)] = cand
                came[(nc, nr)] = (c, r)
                heapq.heappush(open_heap, (cand + hcost(nc, nr), nr, nc))
    else:
        raise NoPath("goal unreachable")
    if (gc, gr) not in g_score:
        raise NoPath("goal unreachable")

    cells = [(gc, gr)]
    while cells[-1] != (sc, sr):
        cells.append(came[cells[-1]])
    cells.reverse()

    # thin the cell chain, then densify back to the waypoint spacing
    pts = [tmap.cell_to_world(c, r) for c, r in cells]
    thinned = pts[:: max(1, int(0.25 / tmap.resolution))]
    if thinned[-1] != pts[-1]:
        thinned.append(pts[-1])
    pts = _densify(thinned, WAYPOINT_SPACING)

    waypoints = [Pose2D(x, y, 0.0) for x, y in pts]
    if waypoints:
        waypoints[-1] = Pose2D(goal.x, goal.y, goal.theta)
    return PathPlan(waypoints)


def path_length(plan: PathPlan) -> float:
    pts = plan.waypoints
    return sum(
        math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(pts, pts[1:])
    )


def _segment_hits_obstacle(tmap: TernaryMap, a: Pose2D, b: Pose2D) -> bool:
    d = math.hypot(b.x - a.x, b.y - a.y)
    n = max(2, int(d / (tmap.resolution / 2)) + 1)
    for k in range(n + 1):
        t = k / n
        if tmap.is_occupied_at(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)):
            return True
    return False


def _min_plan_clearance(tmap: TernaryMap, waypoints) -> float:
    return min(tmap.clearance_at(p.x, p.y) for p in waypoints)


def deform_band(
    plan: PathPlan,
    tmap: TernaryMap,
    robot_radius: float = 0.0,
    alpha: float = BAND_ALPHA,
    beta: float = BAND_BETA,
    d_influence: float = BAND_D_INFLUENCE,
    iterations: int = BAND_ITERATIONS,
) -> PathPlan:
    """Elastic-band relaxation: smoothness pull plus obstacle repulsion.

    Endpoints stay fixed. Raises BandSevered when the relaxed band still cuts
    through occupied space or leaves less clearance than the robot needs.
    """
    if not plan.waypoints:
        raise ValueError("empty plan")
    pts = [(p.x, p.y) for p in plan.waypoints]
    if len(pts) > 2:
        arr = np.array(pts)
        dist = tmap.obstacle_distance
        res = tmap.resolution
        ox, oy = tmap.origin_xy
        h, w = dist.shape
        gy, gx = np.gradient(dist)
        input_clearance = _min_plan_clearance(tmap, plan.waypoints)
        for _ in range(iterations):
            interior = arr[1:-1]
            mid = (arr[:-2] + arr[2:]) / 2.0
            move = alpha * (mid - interior)

            cols = np.clip(((interior[:, 0] - ox) / res).astype(int), 0, w - 1)
            rows = np.clip(((interior[:, 1] - oy) / res).astype(int), 0, h - 1)
            d = dist[rows, cols]
            push = np.zeros_like(interior)
            near = d < d_influence
            if near.any():
                dirs = np.stack([gx[rows, cols], gy[rows, cols]], axis=1)
                norms = np.linalg.norm(dirs, axis=1, keepdims=True)
                ok = near & (norms[:, 0] > 1e-9)
                scale = beta * (1.0 - d / d_influence)
                push[ok] = dirs[ok] / norms[ok] * scale[ok, None]
            step = move + push
            max_move = float(np.abs(step).max()) if step.size else 0.0
            arr[1:-1] += step
            if max_move < BAND_CONVERGENCE:
                break
        new_wps = [plan.waypoints[0]]
        new_wps += [Pose2D(x, y, 0.0) for x, y in arr[1:-1]]
        new_wps.append(plan.waypoints[-1])
        # never hand back a band with less clearance than the input path
        if _min_plan_clearance(tmap, new_wps) < min(input_clearance, d_influence):
            new_wps = list(plan.waypoints)
    else:
        new_wps = list(plan.waypoints)

    for a, b in zip(new_wps, new_wps[1:]):
        if _segment_hits_obstacle(tmap, a, b):
            raise BandSevered("relaxed band crosses occupied space")
    if robot_radius > 0.0:
        interior = new_wps[1:-1] if len(new_wps) > 2 else new_wps
        for p in interior:
            if tmap.clearance_at(p.x, p.y) < robot_radius:
                raise BandSevered("band clearance below robot radius")
    return PathPlan(new_wps, plan.source, plan.goal_tolerance_xy, plan.goal_tolerance_theta)


def _nearest_param(pts: list[Pose2D], x: float, y: float) -> tuple[int, float]:
    """Index and projection parameter of the closest point on the polyline."""
    best = (0, 0.0)
    best_d = math.inf
    for i in range(len(pts) - 1):
        ax, ay = pts[i].x, pts[i].y
        bx, by = pts[i + 1].x, pts[i + 1].y
        vx, vy = bx - ax, by - ay
        L2 = vx * vx + vy * vy
        t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((x - ax) * vx + (y - ay) * vy) / L2))
        px, py = ax + t * vx, ay + t * vy
        d = math.hypot(px - x, py - y)
        if d < best_d:
            best_d = d
            best = (i, t)
    return best


def _lookahead_point(pts: list[Pose2D], idx: int, t: float, dist: float):
    remaining = dist
    ax, ay = (
        pts[idx].x + t * (pts[idx + 1].x - pts[idx].x),
        pts[idx].y + t * (pts[idx + 1].y - pts[idx].y),
    )
    i = idx
    while i < len(pts) - 1:
        bx, by = pts[i + 1].x, pts[i + 1].y
        seg = math.hypot(bx - ax, by - ay)
        if seg >= remaining and seg > 0:
            f = remaining / seg
            return (ax + f * (bx - ax), ay + f * (by - ay))
        remaining -= seg
        ax, ay = bx, by
        i += 1
    return (pts[-1].x, pts[-1].y)


def track(
    plan: PathPlan,
    pose: Pose2D,
    scan,
    max_linear: float = MAX_LINEAR,
    max_angular: float = MAX_ANGULAR,
    lookahead: float = LOOKAHEAD,
) -> LocalCommand:
    """Pure pursuit along the band with scan-based slow-down and blocking."""
    if not plan.waypoints:
        return LocalCommand(Twist2D.ZERO, "reached")
    goal = plan.waypoints[-1]
    if (
        math.hypot(goal.x - pose.x, goal.y - pose.y) <= plan.goal_tolerance_xy
        and abs(normalize_angle(goal.theta - pose.theta)) <= plan.goal_tolerance_theta
    ):
        return LocalCommand(Twist2D.ZERO, "reached")

    ranges = np.asarray(scan.ranges)
    n = ranges.size
    angles = scan.angle_min + np.arange(n) * scan.angle_increment  # robot frame
    # blocked: anything too close in the forward cone
    wrapped = np.mod(angles + math.pi, 2 * math.pi) - math.pi
    forward = np.abs(wrapped) < math.radians(35)
    fr = ranges[forward]
    fr = fr[np.isfinite(fr)]
    if fr.size and fr.min() < BLOCKED_RANGE:
        return LocalCommand(Twist2D.ZERO, "blocked")

    if math.hypot(goal.x - pose.x, goal.y - pose.y) <= plan.goal_tolerance_xy:
        # at position, align heading only
        err = normalize_angle(goal.theta - pose.theta)
        wcmd = max(-max_angular, min(max_angular, 2.0 * err))
        return LocalCommand(Twist2D(0.0, wcmd), "tracking")

    if len(plan.waypoints) == 1:
        tx, ty = goal.x, goal.y
    else:
        idx, t = _nearest_param(plan.waypoints, pose.x, pose.y)
        tx, ty = _lookahead_point(plan.waypoints, idx, t, lookahead)
    bearing = normalize_angle(math.atan2(ty - pose.y, tx - pose.x) - pose.theta)

    v = max_linear
    if fr.size:
        nearest = float(fr.min())
        if nearest < SLOWDOWN_RANGE:
            v *= max(0.0, (nearest - BLOCKED_RANGE) / (SLOWDOWN_RANGE - BLOCKED_RANGE))
    # turn in place when badly misaligned
    if abs(bearing) > math.radians(75):
        v = 0.0
    else:
        v *= math.cos(bearing)
    L = max(lookahead, 1e-6)
    wcmd = 2.0 * v * math.sin(bearing) / L if v > 1e-6 else 2.0 * bearing
    wcmd = max(-max_angular, min(max_angular, wcmd))
    return LocalCommand(Twist2D(max(0.0, v), wcmd), "tracking")


class Navigator:
    """Per-robot leg sequencer: plans each leg, relaxes it, tracks it.

    Stepped synchronously with the simulation tick. Progress events are
    (legs_done, total_legs) tuples appended as legs complete.
    """

    REPLAN_BLOCKED_TICKS = 40

    def __init__(self, robot_radius=0.15, max_linear=MAX_LINEAR, max_angular=MAX_ANGULAR):
        self.robot_radius = robot_radius
        self.max_linear = max_linear
        self.max_angular = max_angular
        self.reset()

    def reset(self):
        self.legs: list[Pose2D] = []
        self.leg_index = 0
        self.plan: PathPlan | None = None
        self.state = "idle"  # idle | executing | blocked | failed | completed
        self.failure_reason: str | None = None
        self.failed_leg: int | None = None
        self.progress_events: list[tuple[int, int]] = []
        self.drawn: list[Pose2D] | None = None
        self._blocked_ticks = 0

    @property
    def active(self) -> bool:
        return self.state in ("executing", "blocked")

    def set_goal(self, goal: Pose2D):
        self.reset()
        self.legs = [goal]
        self.state = "executing"

    def set_waypoints(self, poses: list[Pose2D]):
        self.reset()
        self.legs = list(poses)
        self.state = "executing"

    def set_drawn(self, poses: list[Pose2D]):
        self.reset()
        pts = _densify([(p.x, p.y) for p in poses], WAYPOINT_SPACING)
        wps = [Pose2D(x, y, 0.0) for x, y in pts]
        wps[-1] = poses[-1]
        self.plan = PathPlan(wps, source="drawn")
        self.legs = [poses[-1]]
        self.drawn = wps
        self.state = "executing"

    def cancel(self):
        self.reset()

    def _plan_leg(self, tmap: TernaryMap, pose: Pose2D):
        goal = self.legs[self.leg_index]
        plan = plan_global(tmap, pose, goal, self.robot_radius)
        try:
            plan = deform_band(plan, tmap)
        except BandSevered:
            pass  # track the raw plan; blocking keeps it safe
        self.plan = plan

    def step(self, pose: Pose2D, scan, tmap: TernaryMap) -> Twist2D:
        if not self.active:
            return Twist2D.ZERO
        if self.plan is None:
            try:
                self._plan_leg(tmap, pose)
            except NoPath:
                self.state = "failed"
                self.failed_leg = self.leg_index
                self.failure_reason = f"no path for leg {self.leg_index}"
                return Twist2D.ZERO
            except GoalInObstacle:
                self.state = "failed"
                self.failed_leg = self.leg_index
                self.failure_reason = f"leg {self.leg_index} goal in obstacle"
                return Twist2D.ZERO
        cmd = track(self.plan, pose, scan, self.max_linear, self.max_angular)
        if cmd.status == "reached":
            self.leg_index += 1
            self.progress_events.append((self.leg_index, len(self.legs)))
            self.plan = None
            self._blocked_ticks = 0
            if self.leg_index >= len(self.legs):
                self.state = "completed"
            else:
                self.state = "executing"
            return Twist2D.ZERO
        if cmd.status == "blocked":
            self.state = "blocked"
            self._blocked_ticks += 1
            if self._blocked_ticks >= self.REPLAN_BLOCKED_TICKS and self.drawn is None:
                self.plan = None  # replan against the latest map
                self._blocked_ticks = 0
                return Twist2D.ZERO
            # recovery: rotating in place cannot collide, so re-aim at the
            # path instead of freezing nose-in against an obstacle
            pts = self.plan.waypoints
            idx, t = _nearest_param(pts, pose.x, pose.y)
            tx, ty = _lookahead_point(pts, idx, t, LOOKAHEAD)
            bearing = normalize_angle(math.atan2(ty - pose.y, tx - pose.x) - pose.theta)
            if abs(bearing) > math.radians(15):
                wcmd = max(-self.max_angular, min(self.max_angular, 2.0 * bearing))
                return Twist2D(0.0, wcmd)
        else:
            self.state = "executing"
            self._blocked_ticks = 0
        return cmd.twist
