"""Scenario files: ASCII map, robot spawns, tags, seed, parameter overrides.

The canonical serialization is deterministic so that save(load(s)) is
byte-identical for canonical files.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError
from .geometry import Pose2D

FORMAT_VERSION = 1


@dataclass
class Scenario:
    name: str
    resolution: float
    occupied: np.ndarray  # bool (rows, cols), row 0 at y = 0
    robots: list[tuple[str, Pose2D]]
    tags: list[tuple[int, Pose2D]]
    seed: int = 0
    params: dict[str, float] = field(default_factory=dict)

    def validate(self):
        h, w = self.occupied.shape
        for rid, pose in self.robots:
            c = math.floor(pose.x / self.resolution)
            r = math.floor(pose.y / self.resolution)
            if not (0 <= c < w and 0 <= r < h):
                raise ValidationError(f"robot {rid} spawn outside map")
            if self.occupied[r, c]:
                raise ValidationError(f"robot {rid} spawns inside a wall")
        ids = [t for t, _ in self.tags]
        if len(ids) != len(set(ids)):
            raise ValidationError("duplicate tag id")
        rids = [r for r, _ in self.robots]
        if len(rids) != len(set(rids)):
            raise ValidationError("duplicate robot id")


def _fmt(x: float) -> str:
    return repr(float(x))


def save_scenario(s: Scenario) -> str:
    lines = [
        f"format_version {FORMAT_VERSION}",
        f"name {s.name}",
        f"resolution {_fmt(s.resolution)}",
        f"seed {s.seed}",
    ]
    for key in sorted(s.params):
        lines.append(f"param {key} {_fmt(s.params[key])}")
    lines.append("map")
    h, w = s.occupied.shape
    for r in range(h - 1, -1, -1):  # first text line is the top row
        lines.append("".join("#" if s.occupied[r, c] else "." for c in range(w)))
    lines.append("endmap")
    for rid, p in s.robots:
        lines.append(f"robot {rid} {_fmt(p.x)} {_fmt(p.y)} {_fmt(p.theta)}")
    for tid, p in s.tags:
        lines.append(f"tag {tid} {_fmt(p.x)} {_fmt(p.y)} {_fmt(p.theta)}")
    return "\n".join(lines) + "\n"


def load_scenario_text(text: str) -> Scenario:
    name = ""
    resolution = None
    seed = 0
    params: dict[str, float] = {}
    robots: list[tuple[str, Pose2D]] = []
    tags: list[tuple[int, Pose2D]] = []
    map_lines: list[str] = []
    version = None

    lines = text.splitlines()
    i = 0
    while i < len(lines):
        lineno = i + 1
        line = lines[i]
        i += 1
        stripped = line.strip()
        if not stripped or stripped.startswith("//"):
            continue
        parts = stripped.split()
        kw = parts[0]
        try:
            if kw == "format_version":
                version = int(parts[1])
            elif kw == "name":
                name = parts[1] if len(parts) > 1 else ""
            elif kw == "resolution":
                resolution = float(parts[1])
            elif kw == "seed":
                seed = int(parts[1])
            elif kw == "param":
                params[parts[1]] = float(parts[2])
            elif kw == "map":
                while i < len(lines) and lines[i].strip() != "endmap":
                    map_lines.append(lines[i])
                    i += 1
                if i >= len(lines):
                    raise ParseError("map block missing endmap", lineno, 1)
                i += 1  # consume endmap
            elif kw == "robot":
                robots.append(
                    (parts[1], Pose2D(float(parts[2]), float(parts[3]), float(parts[4])))
                )
            elif kw == "tag":
                theta = float(parts[4]) if len(parts) > 4 else 0.0
                tags.append((int(parts[1]), Pose2D(float(parts[2]), float(parts[3]), theta)))
            else:
                raise ParseError(f"unknown directive {kw!r}", lineno, 1)
        except (IndexError, ValueError) as e:
            raise ParseError(str(e), lineno, 1) from e

    if version is None:
        raise ParseError("missing format_version", 1, 1)
    if resolution is None or resolution <= 0:
        raise ParseError("missing or invalid resolution", 1, 1)
    if not map_lines:
        raise ParseError("missing map block", 1, 1)
    widths = {len(l) for l in map_lines}
    if len(widths) != 1:
        raise ParseError("map is not rectangular", 1, 1)
    for lineno_off, l in enumerate(map_lines):
        for col, ch in enumerate(l):
            if ch not in "#.":
                raise ParseError(f"invalid map char {ch!r}", lineno_off + 1, col + 1)

    h = len(map_lines)
    w = widths.pop()
    occupied = np.zeros((h, w), dtype=bool)
    for text_row, l in enumerate(map_lines):
        occupied[h - 1 - text_row] = [ch == "#" for ch in l]

    s = Scenario(name, resolution, occupied, robots, tags, seed, params)
    s.validate()
    return s


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as f:
        return load_scenario_text(f.read())


def save_scenario_file(s: Scenario, path: str):
    with open(path, "w", encoding="utf-8") as f:
        f.write(save_scenario(s))
