"""Planar poses, rigid transforms, and grid indexing.

All angles are kept in the half-open interval (-pi, pi]; a single canonical
representative avoids +/-pi flapping in comparisons.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import OutOfBounds

TWO_PI = 2.0 * math.pi


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))


@dataclass(frozen=True)
class Transform2D:
    """Rigid transform: rotate by ``rotation`` then translate by ``tx, ty``."""

    tx: float
    ty: float
    rotation: float

    def __post_init__(self):
        object.__setattr__(self, "rotation", normalize_angle(self.rotation))

    @staticmethod
    def identity() -> "Transform2D":
        return Transform2D(0.0, 0.0, 0.0)

    @staticmethod
    def translate(tx: float, ty: float) -> "Transform2D":
        return Transform2D(tx, ty, 0.0)

    @staticmethod
    def rotate(angle: float) -> "Transform2D":
        return Transform2D(0.0, 0.0, angle)

    @staticmethod
    def from_pose(p: Pose2D) -> "Transform2D":
        return Transform2D(p.x, p.y, p.theta)

    def apply_point(self, x: float, y: float) -> tuple[float, float]:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return (c * x - s * y + self.tx, s * x + c * y + self.ty)


@dataclass(frozen=True)
class Twist2D:
    linear: float
    angular: float

    ZERO = None  # set below

    def clamped(self, max_linear: float, max_angular: float) -> "Twist2D":
        return Twist2D(
            max(-max_linear, min(max_linear, self.linear)),
            max(-max_angular, min(max_angular, self.angular)),
        )


Twist2D.ZERO = Twist2D(0.0, 0.0)


@dataclass(frozen=True)
class GridIndex:
    col: int
    row: int


def compose(a: Transform2D, b: Transform2D) -> Transform2D:
    """Transform applying b first, then a."""
    bx, by = a.apply_point(b.tx, b.ty)
    return Transform2D(bx, by, a.rotation + b.rotation)


def inverse(t: Transform2D) -> Transform2D:
    c, s = math.cos(t.rotation), math.sin(t.rotation)
    return Transform2D(-(c * t.tx + s * t.ty), -(-s * t.tx + c * t.ty), -t.rotation)


def apply(t: Transform2D, p: Pose2D) -> Pose2D:
    x, y = t.apply_point(p.x, p.y)
    return Pose2D(x, y, p.theta + t.rotation)


def world_to_grid(
    origin: Transform2D,
    resolution: float,
    p: tuple[float, float],
    width: int | None = None,
    height: int | None = None,
) -> GridIndex:
    """Floor-quantized cell index of a world point.

    ``origin`` maps the grid frame (cell (0,0) corner at its origin) into the
    world frame. When extents are given, indices outside them raise OutOfBounds.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    inv = inverse(origin)
    gx, gy = inv.apply_point(p[0], p[1])
    col = math.floor(gx / resolution)
    row = math.floor(gy / resolution)
    if col < 0 or row < 0:
        raise OutOfBounds(f"point {p} maps to negative index ({col}, {row})")
    if width is not None and col >= width:
        raise OutOfBounds(f"col {col} >= width {width}")
    if height is not None and row >= height:
        raise OutOfBounds(f"row {row} >= height {height}")
    return GridIndex(col, row)


def grid_to_world(
    origin: Transform2D, resolution: float, idx: GridIndex
) -> tuple[float, float]:
    """World coordinates of the cell center."""
    gx = (idx.col + 0.5) * resolution
    gy = (idx.row + 0.5) * resolution
    return origin.apply_point(gx, gy)
