"""Coordination layer: per-robot brokers, selective inter-broker replication,
task lifecycle, pose labels, and the shared detection mission.

Brokers are in-process, one per robot plus one for the coordinator; the
replication transport is pluggable (direct calls for tests, TCP framing for
deployment). Every broker processes messages serially.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import InvalidLabel, InvalidTask, UnknownRobot, UnknownTag
from .geometry import Pose2D, Twist2D


@dataclass(frozen=True)
class Envelope:
    topic: str
    origin_node: str
    sequence: int
    stamp_tick: int
    payload: bytes


def topic_matches(pattern: str, topic: str) -> bool:
    """Exact name, or trailing-wildcard ``prefix/*``."""
    if pattern.endswith("/*"):
        return topic.startswith(pattern[:-1])
    return topic == pattern


@dataclass
class ReplicationPolicy:
    whitelist: set[str]

    def allows(self, topic: str) -> bool:
        return any(topic_matches(p, topic) for p in self.whitelist)


DEFAULT_POLICY = ReplicationPolicy({"merged_map", "mission/*", "status/*"})


class Broker:
    """Per-robot pub/sub hub with loop-suppressed inter-broker forwarding."""

    def __init__(self, node_id: str):
        self.node_id = node_id
        self._subs: list[tuple[str, object]] = []  # (pattern, callback)
        self._seq = {}  # topic -> next sequence for local publishes
        self._seen: set[tuple[str, str, int]] = set()
        self._links: list[tuple["Broker", ReplicationPolicy]] = []

    def subscribe(self, pattern: str, callback):
        self._subs.append((pattern, callback))

    def link(self, other: "Broker", policy: ReplicationPolicy):
        """One-way replication flow from this broker to ``other``."""
        self._links.append((other, policy))

    def publish(self, topic: str, payload: bytes, stamp_tick: int = 0) -> Envelope:
        if not topic:
            raise ValueError("topic must be non-empty")
        seq = self._seq.get(topic, 0)
        self._seq[topic] = seq + 1
        env = Envelope(topic, self.node_id, seq, stamp_tick, payload)
        self._seen.add((env.origin_node, env.topic, env.sequence))
        self._deliver_local(env)
        self._forward(env)
        return env

    def _deliver_local(self, env: Envelope):
        for pattern, callback in list(self._subs):
            if topic_matches(pattern, env.topic):
                callback(env)

    def _forward(self, env: Envelope):
        for other, policy in self._links:
            if policy.allows(env.topic):
                other.receive_replicated(env)

    def receive_replicated(self, env: Envelope):
        key = (env.origin_node, env.topic, env.sequence)
        if key in self._seen:
            return
        self._seen.add(key)
        self._deliver_local(env)
        self._forward(env)


def link_all(brokers: list[Broker], policy: ReplicationPolicy = DEFAULT_POLICY):
    """Bidirectional full-mesh replication between the given brokers."""
    for a, b in itertools.permutations(brokers, 2):
        a.link(b, policy)


@dataclass
class RobotStatus:
    id: str
    battery: float
    velocity: Twist2D
    pose: Pose2D
    task_state: str  # idle | executing | blocked | failed | completed
    active_task_id: str | None = None


GOAL_POSE = "goal_pose"
WAYPOINT_SEQUENCE = "waypoint_sequence"
LABEL_POSE = "label_pose"
DRAWN_PLAN = "drawn_plan"

TERMINAL_STATES = {"completed", "failed", "cancelled"}


@dataclass
class Task:
    id: str
    robot_id: str
    kind: str
    poses: list[Pose2D]
    text: str = ""
    state: str = "queued"
    failure_reason: str | None = None
    issued_tick: int = 0
    terminal_tick: int | None = None

    def transition(self, new_state: str, tick: int, reason: str | None = None):
        if self.state in TERMINAL_STATES:
            raise ValueError(f"task {self.id} already terminal ({self.state})")
        self.state = new_state
        if new_state in TERMINAL_STATES:
            self.terminal_tick = tick
            self.failure_reason = reason


@dataclass
class MissionState:
    total_tags: int
    tag_ids: set[int]
    found: set[int] = field(default_factory=set)
    finder: dict[int, str] = field(default_factory=dict)
    labels: list[tuple[Pose2D, str, str]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return len(self.found) == self.total_tags

    def summary(self) -> str:
        return f"{len(self.found)} of {self.total_tags} items found"


class FleetCoordinator:
    """Owns robot registry, task lifecycle, and mission state.

    One motion task per robot at a time; a newly dispatched motion task
    cancels the previous one.
    """

    def __init__(self, robot_ids: list[str], mission_tags: set[int], broker: Broker):
        self.robot_ids = list(robot_ids)
        self.broker = broker
        self.mission = MissionState(len(mission_tags), set(mission_tags))
        self.tasks: dict[str, Task] = {}
        self.active_task: dict[str, str | None] = {r: None for r in robot_ids}
        self.task_events: list[tuple[int, str, str]] = []  # (tick, task_id, state)
        self._task_counter = 0

    def _new_task_id(self) -> str:
        self._task_counter += 1
        return f"task-{self._task_counter}"

    def dispatch_task(
        self, robot_id: str, kind: str, poses: list[Pose2D], text: str = "", tick: int = 0
    ) -> Task:
        if robot_id not in self.robot_ids:
            raise UnknownRobot(robot_id)
        if kind in (WAYPOINT_SEQUENCE, DRAWN_PLAN) and not poses:
            raise InvalidTask(f"{kind} requires at least one pose")
        if kind == GOAL_POSE and len(poses) != 1:
            raise InvalidTask("goal task requires exactly one pose")
        task = Task(self._new_task_id(), robot_id, kind, list(poses), text, issued_tick=tick)
        self.tasks[task.id] = task
        if kind == LABEL_POSE:
            # annotation, not motion: completes immediately
            self.add_label(poses[0], text, robot_id, tick)
            task.transition("completed", tick)
            self._record(tick, task)
            return task
        previous = self.active_task.get(robot_id)
        if previous is not None and self.tasks[previous].state not in TERMINAL_STATES:
            self.tasks[previous].transition("cancelled", tick)
            self._record(tick, self.tasks[previous])
        self.active_task[robot_id] = task.id
        task.transition("executing", tick)
        self._record(tick, task)
        return task

    def cancel_task(self, task_id: str, tick: int = 0):
        task = self.tasks[task_id]
        if task.state not in TERMINAL_STATES:
            task.transition("cancelled", tick)
            self._record(tick, task)
            if self.active_task.get(task.robot_id) == task_id:
                self.active_task[task.robot_id] = None

    def finish_task(self, task_id: str, tick: int, failed: bool = False, reason=None):
        task = self.tasks[task_id]
        if task.state in TERMINAL_STATES:
            return
        task.transition("failed" if failed else "completed", tick, reason)
        self._record(tick, task)
        if self.active_task.get(task.robot_id) == task_id:
            self.active_task[task.robot_id] = None

    def _record(self, tick: int, task: Task):
        self.task_events.append((tick, task.id, task.state))
        self.broker.publish("status/task", f"{task.id}:{task.state}".encode(), tick)

    def record_detection(self, tag_id: int, robot_id: str, tick: int) -> MissionState:
        if tag_id not in self.mission.tag_ids:
            raise UnknownTag(str(tag_id))
        if tag_id not in self.mission.found:
            self.mission.found.add(tag_id)
            self.mission.finder[tag_id] = robot_id
            self.broker.publish(
                "mission/state", self.mission.summary().encode(), tick
            )
            if self.mission.complete:
                self.broker.publish("mission/complete", b"", tick)
        return self.mission

    def add_label(self, pose: Pose2D, text: str, author: str, tick: int = 0) -> MissionState:
        if not text or len(text.encode("utf-8")) > 256:
            raise InvalidLabel("label text must be non-empty and <= 256 bytes")
        self.mission.labels.append((pose, text, author))
        self.broker.publish("mission/labels", text.encode(), tick)
        return self.mission
