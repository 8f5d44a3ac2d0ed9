"""Regenerate the bundled scenario files in scenarios/.

Two worlds ship with the package:

* ``corridor.scn`` -- a 6 x 3 m three-room floor plan with five colored
  tags and two robots; ``corridor_mission.jsonl`` drives both robots past
  every tag and back to their spawns.
* ``rooms.scn`` -- a 4 x 3 m plan whose top-right chamber is fully sealed;
  goals placed inside it are provably unreachable.

Run from the repository root: ``python3 demos/make_scenarios.py``
"""
import json
import math
import os

import numpy as np

from fleetstation.geometry import Pose2D
from fleetstation.scenario import Scenario, save_scenario_file

OUT = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def corridor() -> Scenario:
    res = 0.05
    occ = np.zeros((60, 120), dtype=bool)  # 6.0 x 3.0 m
    occ[:2, :] = occ[-2:, :] = True
    occ[:, :2] = occ[:, -2:] = True
    # wall A at x in [2.0, 2.1] with a 1.0 m door at y in [1.0, 2.0]
    occ[2:20, 40:42] = True
    occ[40:58, 40:42] = True
    # wall B at x in [4.0, 4.1] with a 1.0 m door at y in [1.9, 2.9]
    occ[2:38, 80:82] = True

    robots = [("r1", Pose2D(0.5, 1.5, 0.0)), ("r2", Pose2D(0.5, 1.0, 0.0))]
    tags = [
        (1, Pose2D(1.0, 2.75, -math.pi / 2)),
        (2, Pose2D(1.0, 0.25, math.pi / 2)),
        (3, Pose2D(3.0, 2.75, -math.pi / 2)),
        (4, Pose2D(3.0, 0.25, math.pi / 2)),
        (5, Pose2D(5.5, 1.5, math.pi)),
    ]
    params = {"lidar_beams": 180.0, "lidar_range": 3.0}
    return Scenario("corridor", res, occ, robots, tags, seed=42, params=params)


def corridor_script() -> list:
    # goals are expressed in the merged frame: world minus r1's spawn
    def m(x, y, th):
        return [x - 0.5, y - 1.5, th]

    return [
        {"tick": 2, "msg": {"type": "set_waypoints", "robot": "r1", "poses": [
            m(1.0, 2.0, math.pi / 2), m(3.0, 2.0, math.pi / 2),
            m(4.7, 1.5, 0.0), m(0.5, 1.5, 0.0)]}},
        {"tick": 2, "msg": {"type": "set_waypoints", "robot": "r2", "poses": [
            m(1.0, 1.0, -math.pi / 2), m(3.0, 1.0, -math.pi / 2),
            m(0.5, 1.0, 0.0)]}},
    ]


def rooms() -> Scenario:
    res = 0.05
    occ = np.zeros((60, 80), dtype=bool)  # 4.0 x 3.0 m
    occ[:2, :] = occ[-2:, :] = True
    occ[:, :2] = occ[:, -2:] = True
    # dividing wall at x in [2.0, 2.1] with a 1.0 m door at y in [1.0, 2.0]
    occ[2:20, 40:42] = True
    occ[40:58, 40:42] = True
    # sealed chamber: x in [2.6, 3.6], y in [2.0, 2.8]; no opening
    occ[40:56, 52:54] = True
    occ[40:56, 70:72] = True
    occ[40:42, 52:72] = True
    occ[54:56, 52:72] = True

    robots = [("r1", Pose2D(0.5, 0.5, 0.0))]
    tags = [(1, Pose2D(3.5, 0.3, math.pi / 2))]
    params = {"lidar_beams": 180.0, "lidar_range": 3.0}
    return Scenario("rooms", res, occ, robots, tags, seed=7, params=params)


def main():
    os.makedirs(OUT, exist_ok=True)
    save_scenario_file(corridor(), os.path.join(OUT, "corridor.scn"))
    with open(os.path.join(OUT, "corridor_mission.jsonl"), "w") as f:
        for cmd in corridor_script():
            f.write(json.dumps(cmd) + "\n")
    save_scenario_file(rooms(), os.path.join(OUT, "rooms.scn"))
    print(f"wrote scenarios to {os.path.abspath(OUT)}")


if __name__ == "__main__":
    main()
