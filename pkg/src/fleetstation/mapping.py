"""Log-odds occupancy grid mapping from odometry-posed laser scans.

Each robot owns one mapper; grid snapshots are immutable values handed to the
merge, planning, and UI layers. Scan poses come straight from odometry; the
merge stage is responsible for correcting inter-map misalignment.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import wire
from .errors import PoseOutsideGrid
from .geometry import Pose2D, Transform2D, compose, inverse

# Inverse sensor model magnitudes.
L_OCC = math.log(0.7 / 0.3)
L_FREE = -math.log(0.6 / 0.4)
L_MAX = 10.0

# Ternary cell codes (also the serialized byte values).
FREE = 0
OCCUPIED = 1
UNKNOWN = 2

P_OCCUPIED = 0.65
P_FREE = 0.35


@dataclass
class OccupancyGrid:
    width: int
    height: int
    resolution: float
    origin: Transform2D
    log_odds: np.ndarray = None  # shape (height, width), float64

    def __post_init__(self):
        if self.log_odds is None:
            self.log_odds = np.zeros((self.height, self.width), dtype=np.float64)

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(
            self.width, self.height, self.resolution, self.origin, self.log_odds.copy()
        )

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        """(col, row) of a world point; may be out of extents."""
        gx, gy = inverse(self.origin).apply_point(x, y)
        return math.floor(gx / self.resolution), math.floor(gy / self.resolution)

    def cell_to_world(self, col: int, row: int) -> tuple[float, float]:
        return self.origin.apply_point(
            (col + 0.5) * self.resolution, (row + 0.5) * self.resolution
        )

    def in_bounds(self, col: int, row: int) -> bool:
        return 0 <= col < self.width and 0 <= row < self.height

    def probability(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.log_odds))


def probability_grid(grid: OccupancyGrid) -> np.ndarray:
    """Ternary classification: occupied if p >= 0.65, free if p <= 0.35, else unknown."""
    p = grid.probability()
    out = np.full(p.shape, UNKNOWN, dtype=np.uint8)
    out[p >= P_OCCUPIED] = OCCUPIED
    out[p <= P_FREE] = FREE
    return out


def _grow_to_include(grid: OccupancyGrid, cols, rows) -> OccupancyGrid:
    """Double the grid toward whichever sides the given cells overflow."""
    min_c = int(min(0, np.min(cols)))
    min_r = int(min(0, np.min(rows)))
    max_c = int(max(grid.width - 1, np.max(cols)))
    max_r = int(max(grid.height - 1, np.max(rows)))

    add_left = add_down = 0
    new_w, new_h = grid.width, grid.height
    # grow by doubling toward whichever side overflows
    while min_c + add_left < 0:
        add_left += new_w
        new_w *= 2
    while max_c + add_left >= new_w:
        new_w *= 2
    while min_r + add_down < 0:
        add_down += new_h
        new_h *= 2
    while max_r + add_down >= new_h:
        new_h *= 2

    data = np.zeros((new_h, new_w), dtype=np.float64)
    data[add_down : add_down + grid.height, add_left : add_left + grid.width] = grid.log_odds
    shift = Transform2D.translate(
        -add_left * grid.resolution, -add_down * grid.resolution
    )
    # new origin places cell (0,0) add_left/add_down cells below-left of the old one
    new_origin = compose(grid.origin, shift)
    return OccupancyGrid(new_w, new_h, grid.resolution, new_origin, data)


def _supercover_cells(x0: float, y0: float, x1: float, y1: float):
    """All integer cells crossed by the segment, in continuous cell coordinates.

    Returns (cols, rows) arrays ordered from start to end, endpoint cell included.
    """
    ts = [np.array([0.0, 1.0])]
    dx = x1 - x0
    dy = y1 - y0
    if dx != 0.0:
        lo, hi = sorted((x0, x1))
        xs = np.arange(math.ceil(lo), math.floor(hi) + 1, dtype=np.float64)
        ts.append((xs - x0) / dx)
    if dy != 0.0:
        lo, hi = sorted((y0, y1))
        ys = np.arange(math.ceil(lo), math.floor(hi) + 1, dtype=np.float64)
        ts.append((ys - y0) / dy)
    t = np.unique(np.clip(np.concatenate(ts), 0.0, 1.0))
    mid = (t[:-1] + t[1:]) / 2.0
    if mid.size == 0:
        mid = np.array([0.0])
    cols = np.floor(x0 + mid * dx).astype(np.int64)
    rows = np.floor(y0 + mid * dy).astype(np.int64)
    # drop duplicate consecutive cells (can appear from clipped crossings)
    keep = np.ones(cols.size, dtype=bool)
    keep[1:] = (np.diff(cols) != 0) | (np.diff(rows) != 0)
    return cols[keep], rows[keep]


def integrate_scan(
    grid: OccupancyGrid,
    pose: Pose2D,
    scan,
    l_occ: float = L_OCC,
    l_free: float = L_FREE,
    l_max: float = L_MAX,
    auto_grow: bool = True,
) -> OccupancyGrid:
    """Ray-carve a scan taken at ``pose`` (grid map frame) into the grid.

    Cells crossed by each finite beam get ``l_free``; the endpoint cell gets
    ``l_occ``. No-return beams carve free space out to range_max. Log-odds are
    clamped to [-l_max, l_max]. Returns the (possibly grown) grid.
    """
    ranges = np.asarray(scan.ranges, dtype=np.float64)
    n = ranges.size
    angles = pose.theta + scan.angle_min + np.arange(n) * scan.angle_increment

    finite = np.isfinite(ranges)
    eff_ranges = np.where(finite, ranges, scan.range_max)
    ex = pose.x + eff_ranges * np.cos(angles)
    ey = pose.y + eff_ranges * np.sin(angles)

    inv_origin = inverse(grid.origin)
    res = grid.resolution
    sx, sy = inv_origin.apply_point(pose.x, pose.y)
    sx, sy = sx / res, sy / res
    c, s = math.cos(inv_origin.rotation), math.sin(inv_origin.rotation)
    gx = (c * ex - s * ey + inv_origin.tx) / res
    gy = (s * ex + c * ey + inv_origin.ty) / res

    if not grid.in_bounds(math.floor(sx), math.floor(sy)):
        if not auto_grow:
            raise PoseOutsideGrid(f"sensor origin ({pose.x}, {pose.y}) outside grid")
        grid = _grow_to_include(grid, np.array([math.floor(sx)]), np.array([math.floor(sy)]))
        return integrate_scan(grid, pose, scan, l_occ, l_free, l_max, auto_grow)

    if auto_grow:
        all_c = np.floor(np.concatenate((gx, [sx]))).astype(np.int64)
        all_r = np.floor(np.concatenate((gy, [sy]))).astype(np.int64)
        if (
            all_c.min() < 0
            or all_r.min() < 0
            or all_c.max() >= grid.width
            or all_r.max() >= grid.height
        ):
            grid = _grow_to_include(grid, all_c, all_r)
            return integrate_scan(grid, pose, scan, l_occ, l_free, l_max, auto_grow)

    data = grid.log_odds
    h, w = data.shape
    for i in range(n):
        if eff_ranges[i] <= 0.0:
            continue
        cols, rows = _supercover_cells(sx, sy, gx[i], gy[i])
        ok = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
        if finite[i]:
            # last traversed cell is the hit cell
            ec, er = cols[-1], rows[-1]
            cols, rows, ok_free = cols[:-1], rows[:-1], ok[:-1]
            data[rows[ok_free], cols[ok_free]] += l_free
            if 0 <= ec < w and 0 <= er < h:
                data[er, ec] += l_occ
        else:
            data[rows[ok], cols[ok]] += l_free
    np.clip(data, -l_max, l_max, out=data)
    return grid


def serialize_grid(grid: OccupancyGrid) -> bytes:
    """Snapshot of the ternary classification plus geometry header.

    Header: width u32, height u32, resolution f64, origin (tx f64, ty f64,
    rot f64), followed by run-length encoded ternary cells. Bit-exact
    round-trip of the ternary raster.
    """
    header = struct.pack(
        ">IIdddd",
        grid.width,
        grid.height,
        grid.resolution,
        grid.origin.tx,
        grid.origin.ty,
        grid.origin.rotation,
    )
    return header + wire.rle_encode(probability_grid(grid))


def deserialize_grid(buf: bytes) -> tuple[np.ndarray, float, Transform2D]:
    """Returns (ternary raster (height, width), resolution, origin)."""
    width, height, resolution, tx, ty, rot = struct.unpack_from(">IIdddd", buf, 0)
    offset = struct.calcsize(">IIdddd")
    cells = wire.rle_decode(buf[offset:])
    if cells.size != width * height:
        raise ValueError("cell count mismatch")
    return cells.reshape(height, width), resolution, Transform2D(tx, ty, rot)
