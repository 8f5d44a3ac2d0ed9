"""Operator-facing service: message protocol, sessions, teleop state machine,
and latest-value data streams.

Wire format (used by the TCP server in ``server.py``): length-delimited UTF-8
JSON messages, each a single flat object with a ``type`` field. The gateway
core here is transport-agnostic: dict in, dicts out.
"""
from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedMessage, NotClaimed, TeleopDenied, UnknownRobot
from .fleet import DRAWN_PLAN, GOAL_POSE, LABEL_POSE, WAYPOINT_SEQUENCE, FleetCoordinator
from .geometry import Pose2D, Twist2D

PROXIMITY_THRESHOLD = 0.5
DEFAULT_PORT = 8765

TELEOP_DEFAULT_LINEAR = 0.2
TELEOP_DEFAULT_ANGULAR = 0.5
TELEOP_MAX_LINEAR = 1.0
TELEOP_MAX_ANGULAR = 2.0
SPEED_STEP = 0.1

STREAMS = ("scan", "camera", "status", "path")
# rate caps in simulation ticks at dt = 0.05 s
STREAM_INTERVAL = {"scan": 2, "camera": 4, "status": 4, "path": 1}

INBOUND_TYPES = {
    "hello",
    "list_robots",
    "toggle_stream",
    "set_goal",
    "set_waypoints",
    "label_pose",
    "draw_plan",
    "teleop_claim",
    "teleop_release",
    "teleop_event",
    "cancel_task",
}


class TeleopState:
    """Speed set-points in exact 0.1 steps from the defaults, plus grip-hold
    engagement flags. The commanded twist is only nonzero while engaged."""

    def __init__(self, mode: str = "minimap"):
        self.linear_steps = 0
        self.angular_steps = 0
        self.linear_engaged = False
        self.angular_engaged = False
        self.mode = mode

    @property
    def linear_set(self) -> float:
        return TELEOP_DEFAULT_LINEAR + SPEED_STEP * self.linear_steps

    @property
    def angular_set(self) -> float:
        return TELEOP_DEFAULT_ANGULAR + SPEED_STEP * self.angular_steps

    def twist(self) -> Twist2D:
        return Twist2D(
            self.linear_set if self.linear_engaged else 0.0,
            self.angular_set if self.angular_engaged else 0.0,
        )

    def _clamp_steps(self):
        min_lin = -round(TELEOP_DEFAULT_LINEAR / SPEED_STEP)
        max_lin = round((TELEOP_MAX_LINEAR - TELEOP_DEFAULT_LINEAR) / SPEED_STEP)
        self.linear_steps = max(min_lin, min(max_lin, self.linear_steps))
        min_ang = -round(TELEOP_DEFAULT_ANGULAR / SPEED_STEP)
        max_ang = round((TELEOP_MAX_ANGULAR - TELEOP_DEFAULT_ANGULAR) / SPEED_STEP)
        self.angular_steps = max(min_ang, min(max_ang, self.angular_steps))

    def apply(self, event: str, value=None):
        if event == "speed_up_linear":
            self.linear_steps += 1
        elif event == "speed_down_linear":
            self.linear_steps -= 1
        elif event == "speed_up_angular":
            self.angular_steps += 1
        elif event == "speed_down_angular":
            self.angular_steps -= 1
        elif event == "engage_linear":
            self.linear_engaged = bool(value)
        elif event == "engage_angular":
            self.angular_engaged = bool(value)
        elif event == "reset":
            self.linear_steps = 0
            self.angular_steps = 0
            self.linear_engaged = False
            self.angular_engaged = False
        else:
            raise MalformedMessage(f"unknown teleop event {event!r}")
        self._clamp_steps()


@dataclass
class OperatorSession:
    session_id: str
    subscriptions: set[tuple[str, str]] = field(default_factory=set)
    teleop_claim: str | None = None
    teleop: TeleopState | None = None
    last_activity_tick: int = 0
    # latest-value outbound state
    last_sent_tick: dict = field(default_factory=dict)  # (robot, stream) -> tick
    last_path_sent: dict = field(default_factory=dict)  # robot -> serialized path
    events: list = field(default_factory=list)  # broadcast messages


def proximity_mask(ranges, threshold: float = PROXIMITY_THRESHOLD):
    """True exactly for finite ranges strictly below the threshold."""
    r = np.asarray(ranges, dtype=float)
    return list(np.isfinite(r) & (r < threshold))


def _pose_from(value) -> Pose2D:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 3
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise MalformedMessage(f"pose must be [x, y, theta], got {value!r}")
    return Pose2D(float(value[0]), float(value[1]), float(value[2]))


class Gateway:
    """Session registry and protocol handler over a FleetCoordinator.

    Every inbound message yields exactly one ack or error reply. Stream frames
    flow separately via ``offer_*`` + ``collect_outbound``.
    """

    def __init__(self, fleet: FleetCoordinator, proximity: float = PROXIMITY_THRESHOLD):
        self.fleet = fleet
        self.proximity = proximity
        self.sessions: dict[str, OperatorSession] = {}
        self.claims: dict[str, str] = {}  # robot_id -> session_id
        self._session_counter = 0
        self.tick = 0
        # pending teleop twists the runner applies each tick
        self.teleop_twists: dict[str, Twist2D] = {}
        # latest frames, keyed by robot
        self._scans: dict[str, tuple] = {}
        self._cameras: dict[str, tuple] = {}
        self._statuses: dict[str, dict] = {}
        self._paths: dict[str, list] = {}
        self._merged_map: bytes | None = None
        self._merged_map_tick = -1
        fleet.broker.subscribe("status/task", self._on_task_event)

    def _on_task_event(self, env):
        task_id, _, state = env.payload.decode("utf-8").partition(":")
        self.broadcast({"type": "task_update", "task_id": task_id, "state": state})

    # -- session lifecycle -------------------------------------------------

    def connect(self) -> str:
        self._session_counter += 1
        sid = f"session-{self._session_counter}"
        self.sessions[sid] = OperatorSession(sid)
        return sid

    def disconnect(self, sid: str):
        session = self.sessions.pop(sid, None)
        if session and session.teleop_claim:
            self._release_claim(session)

    def _release_claim(self, session: OperatorSession):
        robot = session.teleop_claim
        if robot is not None:
            # dead-man: zero twist takes effect on the next tick
            self.teleop_twists[robot] = Twist2D.ZERO
            self.claims.pop(robot, None)
        session.teleop_claim = None
        session.teleop = None

    # -- protocol ----------------------------------------------------------

    def handle_message(self, sid: str, msg) -> dict:
        try:
            return self._dispatch(sid, msg)
        except MalformedMessage as e:
            return {"type": "error", "error": "malformed", "detail": str(e)}
        except UnknownRobot as e:
            return {"type": "error", "error": "unknown_robot", "detail": str(e)}
        except TeleopDenied as e:
            return {"type": "error", "error": "teleop_denied", "detail": str(e)}
        except NotClaimed as e:
            return {"type": "error", "error": "not_claimed", "detail": str(e)}
        except (KeyError, ValueError, TypeError) as e:
            return {"type": "error", "error": "invalid", "detail": str(e)}

    def _require_robot(self, msg) -> str:
        robot = msg.get("robot")
        if not isinstance(robot, str):
            raise MalformedMessage("missing robot field")
        if robot not in self.fleet.robot_ids:
            raise UnknownRobot(robot)
        return robot

    def _dispatch(self, sid: str, msg) -> dict:
        if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
            raise MalformedMessage("message must be an object with a type field")
        mtype = msg["type"]
        if mtype not in INBOUND_TYPES:
            raise MalformedMessage(f"unknown message type {mtype!r}")
        session = self.sessions.get(sid)
        if session is None:
            raise MalformedMessage(f"unknown session {sid!r}")
        session.last_activity_tick = self.tick

        if mtype == "hello":
            return {"type": "ack", "ok": True, "server": "fleetstation"}

        if mtype == "list_robots":
            return {"type": "robot_list", "robots": list(self.fleet.robot_ids)}

        if mtype == "toggle_stream":
            robot = self._require_robot(msg)
            stream = msg.get("stream")
            if stream not in STREAMS:
                raise MalformedMessage(f"unknown stream {stream!r}")
            key = (robot, stream)
            if msg.get("enable", True):
                session.subscriptions.add(key)
            else:
                session.subscriptions.discard(key)
                session.last_sent_tick.pop(key, None)
            return {"type": "ack", "ok": True}

        if mtype == "set_goal":
            robot = self._require_robot(msg)
            pose = _pose_from(msg.get("pose"))
            task = self.fleet.dispatch_task(robot, GOAL_POSE, [pose], tick=self.tick)
            return {"type": "ack", "ok": True, "task_id": task.id}

        if mtype == "set_waypoints":
            robot = self._require_robot(msg)
            poses = msg.get("poses")
            if not isinstance(poses, list) or not poses:
                raise MalformedMessage("poses must be a non-empty list")
            task = self.fleet.dispatch_task(
                robot, WAYPOINT_SEQUENCE, [_pose_from(p) for p in poses], tick=self.tick
            )
            return {"type": "ack", "ok": True, "task_id": task.id}

        if mtype == "label_pose":
            robot = msg.get("robot", "operator")
            pose = _pose_from(msg.get("pose"))
            text = msg.get("text")
            if not isinstance(text, str):
                raise MalformedMessage("label text missing")
            if robot in self.fleet.robot_ids:
                task = self.fleet.dispatch_task(
                    robot, LABEL_POSE, [pose], text=text, tick=self.tick
                )
                reply = {"type": "ack", "ok": True, "task_id": task.id}
            else:
                self.fleet.add_label(pose, text, "operator", self.tick)
                reply = {"type": "ack", "ok": True}
            self.broadcast(
                {"type": "label_added", "pose": [pose.x, pose.y, pose.theta], "text": text}
            )
            return reply

        if mtype == "draw_plan":
            robot = self._require_robot(msg)
            poses = msg.get("poses")
            if not isinstance(poses, list) or not poses:
                raise MalformedMessage("poses must be a non-empty list")
            task = self.fleet.dispatch_task(
                robot, DRAWN_PLAN, [_pose_from(p) for p in poses], tick=self.tick
            )
            return {"type": "ack", "ok": True, "task_id": task.id}

        if mtype == "teleop_claim":
            robot = self._require_robot(msg)
            holder = self.claims.get(robot)
            if holder is not None and holder != sid:
                raise TeleopDenied(f"robot {robot} claimed by {holder}")
            if session.teleop_claim and session.teleop_claim != robot:
                self._release_claim(session)
            self.claims[robot] = sid
            session.teleop_claim = robot
            session.teleop = TeleopState(msg.get("mode", "minimap"))
            self.teleop_twists[robot] = session.teleop.twist()
            return {"type": "ack", "ok": True, "robot": robot}

        if mtype == "teleop_release":
            if session.teleop_claim is None:
                raise NotClaimed("no teleop claim held")
            robot = session.teleop_claim
            self._release_claim(session)
            return {"type": "ack", "ok": True, "robot": robot}

        if mtype == "teleop_event":
            if session.teleop_claim is None or session.teleop is None:
                raise NotClaimed("no teleop claim held")
            session.teleop.apply(msg.get("event"), msg.get("value"))
            self.teleop_twists[session.teleop_claim] = session.teleop.twist()
            return {
                "type": "ack",
                "ok": True,
                "linear_set": session.teleop.linear_set,
                "angular_set": session.teleop.angular_set,
            }

        if mtype == "cancel_task":
            task_id = msg.get("task_id")
            if task_id not in self.fleet.tasks:
                raise MalformedMessage(f"unknown task {task_id!r}")
            self.fleet.cancel_task(task_id, self.tick)
            return {"type": "ack", "ok": True}

        raise MalformedMessage(f"unhandled type {mtype!r}")

    def teleop_twist(self, robot_id: str) -> Twist2D:
        return self.teleop_twists.get(robot_id, Twist2D.ZERO)

    # -- outbound streams --------------------------------------------------

    def broadcast(self, message: dict):
        for session in self.sessions.values():
            session.events.append(message)
            del session.events[:-100]  # bounded

    def offer_scan(self, robot_id: str, scan, tick: int):
        self._scans[robot_id] = (scan, tick)

    def offer_camera(self, robot_id: str, frame, tick: int):
        self._cameras[robot_id] = (frame, tick)

    def offer_status(self, robot_id: str, status: dict, tick: int):
        self._statuses[robot_id] = (status, tick)

    def offer_path(self, robot_id: str, poses, tick: int):
        self._paths[robot_id] = [(p.x, p.y, p.theta) for p in poses]

    def offer_merged_map(self, blob: bytes, tick: int):
        self._merged_map = blob
        self._merged_map_tick = tick

    def offer_mission_state(self, found: int, total: int):
        self.broadcast({"type": "mission_state", "found": found, "total": total})

    def collect_outbound(self, sid: str, tick: int) -> list[dict]:
        """Latest-value flush: stale intermediate frames are dropped."""
        session = self.sessions[sid]
        out = list(session.events)
        session.events.clear()
        for robot, stream in sorted(session.subscriptions):
            key = (robot, stream)
            last = session.last_sent_tick.get(key, -(10 ** 9))
            if stream == "scan" and robot in self._scans:
                scan, stamp = self._scans[robot]
                if stamp > last and tick - last >= STREAM_INTERVAL["scan"]:
                    ranges = np.asarray(scan.ranges, dtype=np.float32)
                    out.append(
                        {
                            "type": "scan",
                            "robot": robot,
                            "angle_min": scan.angle_min,
                            "angle_increment": scan.angle_increment,
                            "ranges": [
                                None if not math.isfinite(v) else float(v) for v in ranges
                            ],
                            "proximity_mask": [
                                bool(b) for b in proximity_mask(scan.ranges, self.proximity)
                            ],
                        }
                    )
                    session.last_sent_tick[key] = tick
            elif stream == "camera" and robot in self._cameras:
                frame, stamp = self._cameras[robot]
                if stamp > last and tick - last >= STREAM_INTERVAL["camera"]:
                    out.append(
                        {
                            "type": "camera",
                            "robot": robot,
                            "width": frame.width,
                            "height": frame.height,
                            "rgb_base64": base64.b64encode(frame.rgb).decode("ascii"),
                            "tags": [
                                {"id": t, "bounds": list(b)} for t, b in frame.visible_tags
                            ],
                        }
                    )
                    session.last_sent_tick[key] = tick
            elif stream == "status" and robot in self._statuses:
                status, stamp = self._statuses[robot]
                if stamp > last and tick - last >= STREAM_INTERVAL["status"]:
                    out.append({"type": "status", "robot": robot, **status})
                    session.last_sent_tick[key] = tick
            elif stream == "path" and robot in self._paths:
                path = self._paths[robot]
                if session.last_path_sent.get(robot) != path:
                    out.append(
                        {
                            "type": "path",
                            "robot": robot,
                            "poses": [[float(np.float32(v)) for v in p] for p in path],
                        }
                    )
                    session.last_path_sent[robot] = path
        if self._merged_map is not None:
            mkey = ("", "merged_map")
            if self._merged_map_tick > session.last_sent_tick.get(mkey, -(10 ** 9)):
                out.append(
                    {
                        "type": "merged_map",
                        "grid_base64": base64.b64encode(self._merged_map).decode("ascii"),
                    }
                )
                session.last_sent_tick[mkey] = self._merged_map_tick
        return out
