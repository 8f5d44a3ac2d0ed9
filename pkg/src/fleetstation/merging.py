"""Fuse per-robot occupancy grids into one operational map.

Coarse alignment comes from the declared spawn transforms; a phase-correlation
step then refines the residual translation, and grids are composed by
log-odds evidence addition. Rotation recovery is out of scope: the coarse
transform is trusted for orientation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mapping
from .errors import DegenerateInput, MissingTransform
from .geometry import Transform2D, compose, inverse
from .mapping import OccupancyGrid, probability_grid

MIN_OCCUPIED_CELLS = 16
CONFIDENCE_FLOOR = 0.2


def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft1(x: np.ndarray, invert: bool = False) -> np.ndarray:
    """Iterative radix-2 FFT along the last axis; length must be a power of two."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    if n == 1:
        return x.copy()
    out = x[..., _bit_reverse_permutation(n)].copy()
    sign = 1.0 if invert else -1.0
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * math.pi * np.arange(half) / size)
        blocks = out.reshape(*out.shape[:-1], n // size, size)
        even = blocks[..., :half].copy()
        odd = blocks[..., half:] * tw
        blocks[..., :half] = even + odd
        blocks[..., half:] = even - odd
        size *= 2
    return out


def fft2(x: np.ndarray, invert: bool = False) -> np.ndarray:
    """2D FFT by row-column decomposition; both dimensions powers of two."""
    out = fft1(x, invert)
    out = fft1(out.swapaxes(-1, -2), invert).swapaxes(-1, -2)
    if invert:
        out = out / (x.shape[-1] * x.shape[-2])
    return out


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def _pad_pow2(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = _next_pow2(max(a.shape[0], b.shape[0]))
    w = _next_pow2(max(a.shape[1], b.shape[1]))
    pa = np.zeros((h, w))
    pb = np.zeros((h, w))
    pa[: a.shape[0], : a.shape[1]] = a
    pb[: b.shape[0], : b.shape[1]] = b
    return pa, pb


def phase_correlate(reference: np.ndarray, moving: np.ndarray):
    """Translation of ``moving`` relative to ``reference`` by phase correlation.

    Inputs are ternary rasters; only occupied cells carry structure. Returns
    (dcol, drow, confidence): shifting ``moving`` by (dcol, drow) aligns it
    with ``reference``. Confidence scores correlation-peak prominence in [0,1].
    """
    ref = (np.asarray(reference) == mapping.OCCUPIED).astype(np.float64)
    mov = (np.asarray(moving) == mapping.OCCUPIED).astype(np.float64)
    if ref.sum() < MIN_OCCUPIED_CELLS or mov.sum() < MIN_OCCUPIED_CELLS:
        raise DegenerateInput("fewer than 16 occupied cells; nothing to register")
    ref, mov = _pad_pow2(ref, mov)

    f = fft2(ref)
    g = fft2(mov)
    cross = f * np.conj(g)
    mag = np.abs(cross)
    r = np.zeros_like(cross)
    nz = mag > 1e-12
    r[nz] = cross[nz] / mag[nz]
    corr = fft2(r, invert=True).real

    peak_flat = int(np.argmax(corr))
    prow, pcol = np.unravel_index(peak_flat, corr.shape)
    h, w = corr.shape
    # peak sits at the negated shift (wrap-around interpreted as signed)
    drow = -(prow - h) if prow > h // 2 else -prow
    dcol = -(pcol - w) if pcol > w // 2 else -pcol

    peak = corr[prow, pcol]
    # second peak outside a 3x3 wrap-around neighborhood of the main peak
    masked = corr.copy()
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            masked[(prow + dr) % h, (pcol + dc) % w] = -np.inf
    second = float(np.max(masked))
    if peak <= 0:
        confidence = 0.0
    else:
        confidence = float(np.clip(1.0 - max(second, 0.0) / peak, 0.0, 1.0))
    return int(dcol), int(drow), confidence


@dataclass
class MergeEstimate:
    robot_id: str
    coarse: Transform2D
    refinement: tuple[int, int]  # (dcol, drow) cells
    confidence: float
    final: Transform2D


def coarse_align(
    grids: dict[str, OccupancyGrid], spawn_transforms: dict[str, Transform2D]
) -> dict[str, Transform2D]:
    """Re-express each grid's frame in the first robot's frame."""
    robot_ids = list(grids.keys())
    for rid in robot_ids:
        if rid not in spawn_transforms:
            raise MissingTransform(rid)
    ref = spawn_transforms[robot_ids[0]]
    inv_ref = inverse(ref)
    return {rid: compose(inv_ref, spawn_transforms[rid]) for rid in robot_ids}


def _raster_in_frame(
    grid: OccupancyGrid,
    frame_to_common: Transform2D,
    bounds: tuple[float, float, float, float],
    resolution: float,
) -> np.ndarray:
    """Nearest-cell resample of a grid's ternary raster into a common frame window."""
    x0, y0, x1, y1 = bounds
    w = int(math.ceil((x1 - x0) / resolution))
    h = int(math.ceil((y1 - y0) / resolution))
    tern = probability_grid(grid)
    out = np.full((h, w), mapping.UNKNOWN, dtype=np.uint8)

    xs = x0 + (np.arange(w) + 0.5) * resolution
    ys = y0 + (np.arange(h) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    to_grid = compose(inverse(grid.origin), inverse(frame_to_common))
    c, s = math.cos(to_grid.rotation), math.sin(to_grid.rotation)
    lx = c * gx - s * gy + to_grid.tx
    ly = s * gx + c * gy + to_grid.ty
    cols = np.floor(lx / grid.resolution).astype(np.int64)
    rows = np.floor(ly / grid.resolution).astype(np.int64)
    ok = (cols >= 0) & (cols < grid.width) & (rows >= 0) & (rows < grid.height)
    out[ok] = tern[rows[ok], cols[ok]]
    return out


def _grid_bounds(grid: OccupancyGrid, transform: Transform2D):
    """World-frame AABB of the transformed grid extent."""
    corners = [
        (0.0, 0.0),
        (grid.width * grid.resolution, 0.0),
        (0.0, grid.height * grid.resolution),
        (grid.width * grid.resolution, grid.height * grid.resolution),
    ]
    t = compose(transform, grid.origin)
    pts = [t.apply_point(x, y) for x, y in corners]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    return min(xs), min(ys), max(xs), max(ys)


def estimate_alignment(
    grids: dict[str, OccupancyGrid],
    spawn_transforms: dict[str, Transform2D],
    previous: dict[str, MergeEstimate] | None = None,
) -> dict[str, MergeEstimate]:
    """Coarse alignment plus phase-correlation refinement per robot.

    Refinements with confidence below the floor fall back to the previous
    refinement (initially zero), preventing corruption when overlap is absent.
    """
    coarse = coarse_align(grids, spawn_transforms)
    robot_ids = list(grids.keys())
    ref_id = robot_ids[0]
    resolution = grids[ref_id].resolution

    bounds = [_grid_bounds(grids[r], coarse[r]) for r in robot_ids]
    x0 = min(b[0] for b in bounds)
    y0 = min(b[1] for b in bounds)
    x1 = max(b[2] for b in bounds)
    y1 = max(b[3] for b in bounds)
    window = (x0, y0, x1, y1)

    ref_raster = _raster_in_frame(grids[ref_id], coarse[ref_id], window, resolution)
    estimates: dict[str, MergeEstimate] = {}
    for rid in robot_ids:
        if rid == ref_id:
            estimates[rid] = MergeEstimate(rid, coarse[rid], (0, 0), 1.0, coarse[rid])
            continue
        raster = _raster_in_frame(grids[rid], coarse[rid], window, resolution)
        try:
            dcol, drow, confidence = phase_correlate(ref_raster, raster)
        except DegenerateInput:
            dcol, drow, confidence = 0, 0, 0.0
        if confidence < CONFIDENCE_FLOOR:
            prev = previous.get(rid) if previous else None
            dcol, drow = prev.refinement if prev else (0, 0)
            confidence = prev.confidence if prev else 0.0
        # moving content sits at +refinement relative to reference: subtract it
        final = compose(
            Transform2D.translate(-dcol * resolution, -drow * resolution), coarse[rid]
        )
        estimates[rid] = MergeEstimate(rid, coarse[rid], (dcol, drow), confidence, final)
    return estimates


def merge(
    grids: dict[str, OccupancyGrid], estimates: dict[str, MergeEstimate]
) -> OccupancyGrid:
    """Compose grids into one by summed log-odds evidence at transformed cells."""
    robot_ids = list(grids.keys())
    resolution = grids[robot_ids[0]].resolution
    bounds = [_grid_bounds(grids[r], estimates[r].final) for r in robot_ids]
    x0 = min(b[0] for b in bounds)
    y0 = min(b[1] for b in bounds)
    x1 = max(b[2] for b in bounds)
    y1 = max(b[3] for b in bounds)
    w = int(math.ceil((x1 - x0) / resolution))
    h = int(math.ceil((y1 - y0) / resolution))

    merged = OccupancyGrid(w, h, resolution, Transform2D.translate(x0, y0))
    xs = x0 + (np.arange(w) + 0.5) * resolution
    ys = y0 + (np.arange(h) + 0.5) * resolution
    gx, gy = np.meshgrid(xs, ys)
    for rid in robot_ids:
        grid = grids[rid]
        to_grid = compose(inverse(grid.origin), inverse(estimates[rid].final))
        c, s = math.cos(to_grid.rotation), math.sin(to_grid.rotation)
        lx = c * gx - s * gy + to_grid.tx
        ly = s * gx + c * gy + to_grid.ty
        cols = np.floor(lx / grid.resolution).astype(np.int64)
        rows = np.floor(ly / grid.resolution).astype(np.int64)
        ok = (cols >= 0) & (cols < grid.width) & (rows >= 0) & (rows < grid.height)
        merged.log_odds[ok] += grid.log_odds[rows[ok], cols[ok]]
    np.clip(merged.log_odds, -mapping.L_MAX, mapping.L_MAX, out=merged.log_odds)
    return merged
