"""System assembly and the headless mission loop: scenario -> live world,
mappers, merger, navigators, fleet, gateway; scripted runs, metrics, replay.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

from . import merging, nav, sim
from .errors import Timeout
from .fleet import (
    Broker,
    DEFAULT_POLICY,
    DRAWN_PLAN,
    FleetCoordinator,
    GOAL_POSE,
    TERMINAL_STATES,
    WAYPOINT_SEQUENCE,
    link_all,
)
from .gateway import Gateway
from .geometry import Pose2D, Transform2D, Twist2D, apply, inverse
from .mapping import OccupancyGrid, integrate_scan, serialize_grid
from .nav import Navigator, TernaryMap
from .scenario import Scenario

RECORD_FORMAT_VERSION = 1

SCAN_INTERVAL = 2  # ticks (10 Hz at dt = 0.05)
MAP_INTERVAL = 5
DETECT_INTERVAL = 5
STATUS_INTERVAL = 4  # 5 Hz
MERGE_INTERVAL = 100  # 5 simulated seconds


class System:
    """Everything needed to run one scenario, stepped one tick at a time."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        p = scenario.params
        robots = [
            sim.RobotBody(rid, spawn, Pose2D(0.0, 0.0, 0.0), radius=p.get("robot_radius", 0.15))
            for rid, spawn in scenario.robots
        ]
        self.world = sim.WorldModel(
            scenario.occupied.copy(),
            scenario.resolution,
            tags=[sim.TagMarker(tid, pose) for tid, pose in scenario.tags],
            robots=robots,
            rng_seed=scenario.seed,
            dt=p.get("dt", sim.DEFAULT_DT),
            odom_noise=bool(p.get("odom_noise", 1.0)),
            lidar_beams=int(p.get("lidar_beams", sim.DEFAULT_LIDAR_BEAMS)),
            lidar_range=p.get("lidar_range", sim.DEFAULT_LIDAR_RANGE),
        )
        self.robot_ids = [r.id for r in robots]
        self.spawn_transforms = {
            rid: Transform2D.from_pose(spawn) for rid, spawn in scenario.robots
        }

        self.brokers = {rid: Broker(rid) for rid in self.robot_ids}
        self.coordinator_broker = Broker("coordinator")
        link_all(list(self.brokers.values()) + [self.coordinator_broker], DEFAULT_POLICY)
        self.fleet = FleetCoordinator(
            self.robot_ids, {tid for tid, _ in scenario.tags}, self.coordinator_broker
        )
        self.gateway = Gateway(self.fleet)

        n0 = 64
        res = scenario.resolution
        center = Transform2D.translate(-n0 / 2 * res, -n0 / 2 * res)
        self.mappers = {
            rid: OccupancyGrid(n0, n0, res, center) for rid in self.robot_ids
        }
        max_lin = p.get("max_linear", nav.MAX_LINEAR)
        self.navigators = {
            rid: Navigator(robot_radius=robots[0].radius, max_linear=max_lin)
            for rid in self.robot_ids
        }
        self._nav_task: dict[str, str | None] = {rid: None for rid in self.robot_ids}
        self._estimates: dict[str, merging.MergeEstimate] | None = None
        self.merged_grid: OccupancyGrid | None = None
        self.merged_tmap: TernaryMap | None = None
        self._scans: dict[str, sim.LaserScan] = {}
        self.distance_traveled = {rid: 0.0 for rid in self.robot_ids}
        self._last_true = {r.id: r.pose_true for r in robots}
        self.tag_found_tick: dict[int, int] = {}
        self.min_clearance = {rid: math.inf for rid in self.robot_ids}
        self._mission_count_sent = -1

    # -- frames ------------------------------------------------------------

    def merged_pose(self, rid: str) -> Pose2D:
        """Robot pose estimate in the merged-map frame."""
        est = self._estimates[rid] if self._estimates else None
        t = est.final if est else merging.coarse_align(
            self.mappers, self.spawn_transforms
        )[rid]
        return apply(t, self.world.robot(rid).pose_odom)

    def true_merged_pose(self, rid: str) -> Pose2D:
        """Ground-truth pose expressed in the merged frame (for metrics only)."""
        ref = self.spawn_transforms[self.robot_ids[0]]
        return apply(inverse(ref), self.world.robot(rid).pose_true)

    # -- per-tick phases ---------------------------------------------------

    def _refresh_scans(self):
        for rid in self.robot_ids:
            self._scans[rid] = sim.scan(self.world, rid)

    def _integrate_maps(self):
        for rid in self.robot_ids:
            scan = self._scans.get(rid)
            if scan is None:
                continue
            self.mappers[rid] = integrate_scan(
                self.mappers[rid], self.world.robot(rid).pose_odom, scan
            )

    def _merge_maps(self):
        self._estimates = merging.estimate_alignment(
            self.mappers, self.spawn_transforms, self._estimates
        )
        self.merged_grid = merging.merge(self.mappers, self._estimates)
        self.merged_tmap = TernaryMap.from_grid(self.merged_grid)
        blob = serialize_grid(self.merged_grid)
        self.coordinator_broker.publish("merged_map", blob, self.world.tick)
        self.gateway.offer_merged_map(blob, self.world.tick)

    def _load_new_tasks(self):
        for rid in self.robot_ids:
            active = self.fleet.active_task.get(rid)
            if active == self._nav_task[rid]:
                continue
            navigator = self.navigators[rid]
            if active is None:
                navigator.cancel()
            else:
                task = self.fleet.tasks[active]
                if task.kind == GOAL_POSE:
                    navigator.set_goal(task.poses[0])
                elif task.kind == WAYPOINT_SEQUENCE:
                    navigator.set_waypoints(task.poses)
                elif task.kind == DRAWN_PLAN:
                    navigator.set_drawn(task.poses)
            self._nav_task[rid] = active

    def _navigate(self) -> dict[str, Twist2D]:
        twists = {}
        for rid in self.robot_ids:
            if rid in self.gateway.claims:
                twists[rid] = self.gateway.teleop_twist(rid)
                continue
            navigator = self.navigators[rid]
            if not navigator.active or self.merged_tmap is None:
                twists[rid] = Twist2D.ZERO
                continue
            scan = self._scans.get(rid)
            if scan is None:
                twists[rid] = Twist2D.ZERO
                continue
            twist = navigator.step(self.merged_pose(rid), scan, self.merged_tmap)
            twists[rid] = twist
            task_id = self._nav_task[rid]
            if task_id is not None:
                if navigator.state == "completed":
                    self.fleet.finish_task(task_id, self.world.tick)
                    self._nav_task[rid] = None
                elif navigator.state == "failed":
                    self.fleet.finish_task(
                        task_id, self.world.tick, failed=True, reason=navigator.failure_reason
                    )
                    self._nav_task[rid] = None
            if navigator.plan is not None:
                self.gateway.offer_path(rid, navigator.plan.waypoints, self.world.tick)
        return twists

    def _detect(self):
        for rid in self.robot_ids:
            frame = sim.render_camera(self.world, rid)
            self.gateway.offer_camera(rid, frame, self.world.tick)
            for tag_id in sim.detect_tags(frame):
                if tag_id not in self.fleet.mission.found:
                    self.fleet.record_detection(tag_id, rid, self.world.tick)
                    self.tag_found_tick[tag_id] = self.world.tick
        count = len(self.fleet.mission.found)
        if count != self._mission_count_sent:
            self.gateway.offer_mission_state(count, self.fleet.mission.total_tags)
            self._mission_count_sent = count

    def _publish_status(self):
        for rid in self.robot_ids:
            robot = self.world.robot(rid)
            pose = self.merged_pose(rid)
            task_id = self.fleet.active_task.get(rid)
            nav_state = self.navigators[rid].state
            if task_id is None:
                task_state = "idle"
            elif nav_state in ("blocked",):
                task_state = "blocked"
            else:
                task_state = "executing"
            status = {
                "battery": robot.battery,
                "velocity": [robot.commanded.linear, robot.commanded.angular],
                "pose": [pose.x, pose.y, pose.theta],
                "task_state": task_state,
                "active_task_id": task_id,
            }
            self.brokers[rid].publish(f"status/{rid}", json.dumps(status).encode(), self.world.tick)
            self.gateway.offer_status(rid, status, self.world.tick)

    def step(self):
        tick = self.world.tick
        self.gateway.tick = tick
        if tick % SCAN_INTERVAL == 0:
            self._refresh_scans()
            for rid in self.robot_ids:
                self.gateway.offer_scan(rid, self._scans[rid], tick)
        if tick % MAP_INTERVAL == 0:
            self._integrate_maps()
        if tick % MERGE_INTERVAL == 0:
            self._merge_maps()
        self._load_new_tasks()
        twists = self._navigate()
        for rid, twist in twists.items():
            self.world.set_command(rid, twist)
        sim.step(self.world)
        for rid in self.robot_ids:
            robot = self.world.robot(rid)
            prev = self._last_true[rid]
            self.distance_traveled[rid] += math.hypot(
                robot.pose_true.x - prev.x, robot.pose_true.y - prev.y
            )
            self._last_true[rid] = robot.pose_true
            self.min_clearance[rid] = min(
                self.min_clearance[rid],
                sim.clearance(self.world, robot.pose_true.x, robot.pose_true.y)
                - robot.radius,
            )
        if tick % DETECT_INTERVAL == 0:
            self._detect()
        if tick % STATUS_INTERVAL == 0:
            self._publish_status()


@dataclass
class RunRecord:
    format_version: int
    scenario_name: str
    seed: int
    commands: list  # [{"tick": int, "msg": {...}}]
    task_timings: list
    completion_tick: int | None
    return_tick: int | None
    final_poses: dict
    metrics: dict

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "RunRecord":
        return RunRecord(**json.loads(text))


def load_script(path: str) -> list[dict]:
    """Line-delimited JSON: {"tick": N, "msg": {...gateway message...}}."""
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                out.append(json.loads(line))
    return sorted(out, key=lambda c: c["tick"])


def run_headless(
    scenario: Scenario,
    script: list[dict],
    max_ticks: int = 20000,
    require_return: bool = True,
) -> RunRecord:
    """Execute a scripted mission to completion (all tags found and all tasks
    terminal) or raise Timeout carrying the partial record."""
    system = System(scenario)
    session = system.gateway.connect()
    pending = sorted(script, key=lambda c: c["tick"])
    next_cmd = 0
    completion_tick = None
    return_tick = None

    for _ in range(max_ticks):
        tick = system.world.tick
        while next_cmd < len(pending) and pending[next_cmd]["tick"] <= tick:
            system.gateway.handle_message(session, pending[next_cmd]["msg"])
            next_cmd += 1
        system.step()
        if completion_tick is None and system.fleet.mission.complete:
            completion_tick = system.world.tick
        all_done = next_cmd >= len(pending) and all(
            t.state in TERMINAL_STATES for t in system.fleet.tasks.values()
        )
        if completion_tick is not None and (not require_return or all_done):
            return_tick = system.world.tick
            break
    record = _make_record(scenario, script, system, completion_tick, return_tick)
    if completion_tick is None or return_tick is None:
        err = Timeout(
            f"mission incomplete after {system.world.tick} ticks "
            f"({system.fleet.mission.summary()})"
        )
        err.record = record
        raise err
    return record


def _make_record(scenario, script, system, completion_tick, return_tick) -> RunRecord:
    task_timings = [
        {
            "task_id": t.id,
            "robot": t.robot_id,
            "kind": t.kind,
            "state": t.state,
            "issued_tick": t.issued_tick,
            "terminal_tick": t.terminal_tick,
        }
        for t in system.fleet.tasks.values()
    ]
    task_counts: dict[str, int] = {}
    for t in system.fleet.tasks.values():
        task_counts[t.state] = task_counts.get(t.state, 0) + 1
    metrics = {
        "completion_tick": completion_tick,
        "return_tick": return_tick,
        "tag_found_tick": {str(k): v for k, v in sorted(system.tag_found_tick.items())},
        "distance_traveled": {
            rid: round(d, 6) for rid, d in system.distance_traveled.items()
        },
        "task_counts": task_counts,
        "min_clearance": {
            rid: (round(c, 6) if math.isfinite(c) else None)
            for rid, c in system.min_clearance.items()
        },
    }
    final_poses = {
        r.id: [r.pose_true.x, r.pose_true.y, r.pose_true.theta] for r in system.world.robots
    }
    return RunRecord(
        RECORD_FORMAT_VERSION,
        scenario.name,
        scenario.seed,
        list(script),
        task_timings,
        completion_tick,
        return_tick,
        final_poses,
        metrics,
    )


def replay(record: RunRecord, scenario: Scenario) -> RunRecord:
    """Re-run a recorded mission; determinism makes the result identical."""
    return run_headless(scenario, record.commands)


def metrics_lines(record: RunRecord) -> str:
    """Line-delimited structured text, trivially diffable."""
    m = record.metrics
    lines = [
        f"scenario {record.scenario_name}",
        f"seed {record.seed}",
        f"completion_tick {m['completion_tick']}",
        f"return_tick {m['return_tick']}",
    ]
    for tag, tick in m["tag_found_tick"].items():
        lines.append(f"tag_found {tag} {tick}")
    for rid, d in sorted(m["distance_traveled"].items()):
        lines.append(f"distance_traveled {rid} {d}")
    for state, n in sorted(m["task_counts"].items()):
        lines.append(f"task_count {state} {n}")
    return "\n".join(lines) + "\n"
