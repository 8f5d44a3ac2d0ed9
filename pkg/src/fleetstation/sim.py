"""Deterministic fixed-timestep 2D world: differential-drive robots, raycast
LiDAR, a raycast first-person camera, fiducial tags, and battery drain.

The world is owned by a single loop; callers queue commands in and read
snapshots out. Identical (scenario, seed, command log) reproduces identical
state at every tick.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UnknownRobot
from .geometry import Pose2D, Twist2D, normalize_angle

DEFAULT_DT = 0.05
DEFAULT_LIDAR_BEAMS = 360
DEFAULT_LIDAR_RANGE = 8.0
DEFAULT_CAM_WIDTH = 160
DEFAULT_CAM_HEIGHT = 120
DEFAULT_CAM_FOV = math.radians(60.0)
DEFAULT_TAG_MIN_PIXELS = 20

ODOM_SIGMA_D = 0.01  # multiplicative, per distance increment
ODOM_SIGMA_THETA = math.radians(0.5)  # rad of heading noise per meter traveled

BATTERY_IDLE_DRAIN = 0.0001  # fraction per second
BATTERY_SPEED_DRAIN = 0.0004  # fraction per second per m/s commanded


@dataclass
class TagMarker:
    id: int
    pose: Pose2D
    size: float = 0.2


@dataclass
class RobotBody:
    id: str
    pose_true: Pose2D
    pose_odom: Pose2D
    radius: float = 0.15
    commanded: Twist2D = Twist2D.ZERO
    battery: float = 1.0


@dataclass
class LaserScan:
    angle_min: float
    angle_increment: float
    range_max: float
    ranges: np.ndarray
    stamp_tick: int


@dataclass
class CameraFrame:
    width: int
    height: int
    rgb: bytes
    stamp_tick: int
    visible_tags: list  # (tag_id, (x0, y0, x1, y1)) pixel bounds


@dataclass
class WorldModel:
    occupied: np.ndarray  # bool, shape (rows, cols); cell (0,0) corner at world (0,0)
    resolution: float
    tags: list[TagMarker] = field(default_factory=list)
    robots: list[RobotBody] = field(default_factory=list)
    tick: int = 0
    dt: float = DEFAULT_DT
    rng_seed: int = 0
    odom_noise: bool = True
    lidar_beams: int = DEFAULT_LIDAR_BEAMS
    lidar_range: float = DEFAULT_LIDAR_RANGE
    cam_width: int = DEFAULT_CAM_WIDTH
    cam_height: int = DEFAULT_CAM_HEIGHT
    cam_fov: float = DEFAULT_CAM_FOV

    def __post_init__(self):
        self._rngs = {
            r.id: np.random.default_rng((self.rng_seed, i)) for i, r in enumerate(self.robots)
        }

    @property
    def time(self) -> float:
        return self.tick * self.dt

    def robot(self, robot_id: str) -> RobotBody:
        for r in self.robots:
            if r.id == robot_id:
                return r
        raise UnknownRobot(robot_id)

    def set_command(self, robot_id: str, twist: Twist2D):
        self.robot(robot_id).commanded = twist


def _arc_increment(v: float, w: float, theta: float, dt: float) -> tuple[float, float, float]:
    """Exact unicycle displacement over dt from heading theta."""
    if abs(w) < 1e-9:
        return v * dt * math.cos(theta), v * dt * math.sin(theta), w * dt
    dx = (v / w) * (math.sin(theta + w * dt) - math.sin(theta))
    dy = (v / w) * (math.cos(theta) - math.cos(theta + w * dt))
    return dx, dy, w * dt


def clearance(world: WorldModel, x: float, y: float, window: float = 1.0) -> float:
    """Distance from a point to the nearest occupied cell (as a filled square)."""
    res = world.resolution
    occ = world.occupied
    c0 = max(0, int((x - window) / res))
    c1 = min(occ.shape[1], int((x + window) / res) + 1)
    r0 = max(0, int((y - window) / res))
    r1 = min(occ.shape[0], int((y + window) / res) + 1)
    sub = occ[r0:r1, c0:c1]
    rows, cols = np.nonzero(sub)
    if rows.size == 0:
        return window
    cx0 = (cols + c0) * res
    cy0 = (rows + r0) * res
    ddx = np.maximum(np.maximum(cx0 - x, x - (cx0 + res)), 0.0)
    ddy = np.maximum(np.maximum(cy0 - y, y - (cy0 + res)), 0.0)
    return float(np.sqrt(ddx * ddx + ddy * ddy).min())


def _collides(world: WorldModel, x: float, y: float, radius: float) -> bool:
    return clearance(world, x, y, radius + 4 * world.resolution) < radius


def step(world: WorldModel) -> WorldModel:
    """Advance every robot one tick; commanded velocities are held."""
    assert world.dt > 0
    dt = world.dt
    for robot in world.robots:
        v, w = robot.commanded.linear, robot.commanded.angular
        pose = robot.pose_true
        dx, dy, dth = _arc_increment(v, w, pose.theta, dt)
        scale = 1.0
        if _collides(world, pose.x + dx, pose.y + dy, robot.radius):
            # bisect the largest collision-free fraction of the step
            lo, hi = 0.0, 1.0
            for _ in range(30):
                mid = (lo + hi) / 2.0
                mdx, mdy, _ = _arc_increment(v, w, pose.theta, dt * mid)
                if _collides(world, pose.x + mdx, pose.y + mdy, robot.radius):
                    hi = mid
                else:
                    lo = mid
            scale = lo
            dx, dy, dth = _arc_increment(v, w, pose.theta, dt * scale)
        robot.pose_true = Pose2D(pose.x + dx, pose.y + dy, pose.theta + dth)

        # odometry integrates the same motion, optionally with seeded noise
        op = robot.pose_odom
        if world.odom_noise:
            dist = v * dt * scale
            rng = world._rngs[robot.id]
            n1, n2 = rng.standard_normal(2)
            dist = dist * (1.0 + ODOM_SIGMA_D * n1)
            odth = dth + ODOM_SIGMA_THETA * abs(dist) * n2
            odx, ody, odth2 = _arc_increment(dist / dt, odth / dt, op.theta, dt)
        else:
            odx, ody, odth2 = _arc_increment(v, w, op.theta, dt * scale)
        robot.pose_odom = Pose2D(op.x + odx, op.y + ody, op.theta + odth2)

        robot.battery = max(
            0.0, robot.battery - dt * (BATTERY_IDLE_DRAIN + BATTERY_SPEED_DRAIN * abs(v))
        )
    world.tick += 1
    return world


def _march(world: WorldModel, x: float, y: float, angles: np.ndarray, range_max: float):
    """Vectorized fixed-step ray march; returns ranges with +inf for no return."""
    res = world.resolution
    step_len = res / 2.0
    n_steps = int(math.ceil(range_max / step_len))
    t = (np.arange(1, n_steps + 1) * step_len)[None, :]  # (1, S)
    ca = np.cos(angles)[:, None]
    sa = np.sin(angles)[:, None]
    px = x + t * ca
    py = y + t * sa
    cols = np.floor(px / res).astype(np.int64)
    rows = np.floor(py / res).astype(np.int64)
    h, w = world.occupied.shape
    inb = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
    hit = np.zeros(cols.shape, dtype=bool)
    hit[inb] = world.occupied[rows[inb], cols[inb]]
    first = np.argmax(hit, axis=1)
    any_hit = hit.any(axis=1)
    ranges = np.full(angles.shape, np.inf)
    ranges[any_hit] = (first[any_hit] + 1) * step_len
    ranges = np.minimum(ranges, range_max, where=np.isfinite(ranges), out=ranges)
    return ranges


def scan(world: WorldModel, robot_id: str) -> LaserScan:
    """One ray per beam from the true pose; range to the first occupied cell."""
    robot = world.robot(robot_id)
    n = world.lidar_beams
    inc = 2.0 * math.pi / n
    angle_min = -math.pi
    angles = robot.pose_true.theta + angle_min + np.arange(n) * inc
    ranges = _march(world, robot.pose_true.x, robot.pose_true.y, angles, world.lidar_range)
    return LaserScan(angle_min, inc, world.lidar_range, ranges, world.tick)


def _tag_visibility(world: WorldModel, robot: RobotBody):
    """Tags in the frustum with unobstructed line of sight.

    Returns (tag, distance, bearing) tuples; bearing in the robot frame.
    """
    out = []
    pose = robot.pose_true
    half_fov = world.cam_fov / 2.0
    for tag in world.tags:
        dx = tag.pose.x - pose.x
        dy = tag.pose.y - pose.y
        dist = math.hypot(dx, dy)
        if dist < 1e-6 or dist > world.lidar_range:
            continue
        bearing = normalize_angle(math.atan2(dy, dx) - pose.theta)
        if abs(bearing) > half_fov:
            continue
        # line of sight: no wall strictly before the tag
        r = _march(world, pose.x, pose.y, np.array([pose.theta + bearing]), dist)[0]
        if np.isfinite(r) and r < dist - world.resolution:
            continue
        out.append((tag, dist, bearing))
    return out


def render_camera(world: WorldModel, robot_id: str) -> CameraFrame:
    """Column-raycast first-person frame with tags drawn as solid quads."""
    robot = world.robot(robot_id)
    pose = robot.pose_true
    w, h = world.cam_width, world.cam_height
    focal = (w / 2.0) / math.tan(world.cam_fov / 2.0)

    xs = (np.arange(w) + 0.5 - w / 2.0) / focal
    local_angles = np.arctan(xs)
    dists = _march(world, pose.x, pose.y, pose.theta + local_angles, world.lidar_range)
    perp = dists * np.cos(local_angles)

    img = np.empty((h, w, 3), dtype=np.uint8)
    img[: h // 2] = (60, 60, 70)  # ceiling
    img[h // 2 :] = (40, 35, 30)  # floor
    wall_h = np.zeros(w)
    finite = np.isfinite(perp)
    wall_h[finite] = np.clip(focal * 1.0 / perp[finite], 0, h)
    shade = np.zeros(w)
    shade[finite] = np.clip(220 - 22 * perp[finite], 40, 220)
    half = (wall_h / 2).astype(int)
    mid = h // 2
    for c in np.nonzero(finite)[0]:
        img[mid - half[c] : mid + half[c], c] = int(shade[c])

    palette = [(200, 40, 40), (40, 160, 40), (40, 80, 220), (210, 180, 30), (170, 40, 180)]
    visible = []
    for tag, dist, bearing in _tag_visibility(world, robot):
        cx = focal * math.tan(bearing) + w / 2.0
        size_px = focal * tag.size / dist
        x0 = int(round(cx - size_px / 2))
        x1 = int(round(cx + size_px / 2))
        y0 = int(round(mid - size_px / 2))
        y1 = int(round(mid + size_px / 2))
        color = palette[tag.id % len(palette)]
        img[max(0, y0) : max(0, y1), max(0, x0) : max(0, x1)] = color
        visible.append((tag.id, (x0, y0, x1, y1)))
    return CameraFrame(w, h, img.tobytes(), world.tick, visible)


def detect_tags(frame: CameraFrame, min_pixels: int = DEFAULT_TAG_MIN_PIXELS) -> list[int]:
    """Tag ids whose pixel bounds meet the minimum-size threshold."""
    out = []
    for tag_id, (x0, y0, x1, y1) in frame.visible_tags:
        if min(x1 - x0, y1 - y0) >= min_pixels:
            out.append(tag_id)
    return out
