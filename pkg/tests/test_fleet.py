import itertools
import random

import pytest

from fleetstation.errors import InvalidLabel, InvalidTask, UnknownRobot, UnknownTag
from fleetstation.fleet import (
    Broker,
    FleetCoordinator,
    GOAL_POSE,
    LABEL_POSE,
    ReplicationPolicy,
    WAYPOINT_SEQUENCE,
    link_all,
    topic_matches,
)
from fleetstation.geometry import Pose2D


def collector(store):
    return lambda env: store.append(env)


def test_local_pub_sub():
    b = Broker("r1")
    got = []
    b.subscribe("scan", collector(got))
    b.publish("scan", b"x")
    assert len(got) == 1 and got[0].payload == b"x"


def test_publish_order_and_sequence():
    b = Broker("r1")
    got = []
    b.subscribe("scan", collector(got))
    b.publish("scan", b"a")
    b.publish("scan", b"b")
    assert [e.sequence for e in got] == [0, 1]
    assert [e.payload for e in got] == [b"a", b"b"]


def test_pattern_semantics():
    b = Broker("r1")
    got = []
    b.subscribe("cmd/*", collector(got))
    b.publish("cmd/vel", b"v")
    b.publish("scanner", b"s")
    assert [e.topic for e in got] == ["cmd/vel"]
    assert topic_matches("cmd/*", "cmd/vel")
    assert not topic_matches("cmd/*", "scanner")


def test_whitelist_replication():
    a, b, c = Broker("a"), Broker("b"), Broker("c")
    policy = ReplicationPolicy({"merged_map", "mission/*"})
    link_all([a, b, c], policy)
    got_b, got_c = [], []
    b.subscribe("merged_map", collector(got_b))
    c.subscribe("merged_map", collector(got_c))
    a.publish("merged_map", b"m")
    assert len(got_b) == 1 and len(got_c) == 1


def test_non_whitelisted_never_crosses():
    a, b = Broker("a"), Broker("b")
    link_all([a, b], ReplicationPolicy({"merged_map"}))
    got = []
    b.subscribe("camera", collector(got))
    a.publish("camera", b"frame")
    assert got == []


def test_ring_exactly_once():
    a, b, c = Broker("a"), Broker("b"), Broker("c")
    policy = ReplicationPolicy({"mission/*"})
    a.link(b, policy)
    b.link(c, policy)
    c.link(a, policy)
    counts = {"a": [], "b": [], "c": []}
    for name, broker in (("a", a), ("b", b), ("c", c)):
        broker.subscribe("mission/state", collector(counts[name]))
    a.publish("mission/state", b"1 of 5")
    assert all(len(v) == 1 for v in counts.values())


def test_randomized_topologies_exactly_once():
    rng = random.Random(1234)
    for trial in range(10):
        n = rng.randint(2, 6)
        brokers = [Broker(f"n{i}") for i in range(n)]
        policy = ReplicationPolicy({"mission/*", "status/*"})
        if trial % 2 == 0:  # ring
            for i in range(n):
                brokers[i].link(brokers[(i + 1) % n], policy)
                brokers[(i + 1) % n].link(brokers[i], policy)
        else:  # star
            for leaf in brokers[1:]:
                brokers[0].link(leaf, policy)
                leaf.link(brokers[0], policy)
        received = {b.node_id: [] for b in brokers}
        for b in brokers:
            b.subscribe("mission/*", collector(received[b.node_id]))
            b.subscribe("camera", collector(received[b.node_id]))
        published = []
        for k in range(50):
            src = rng.choice(brokers)
            topic = rng.choice(["mission/state", "status/r1", "camera"])
            env = src.publish(topic, f"{k}".encode())
            published.append((src.node_id, env))
        for src_id, env in published:
            for b in brokers:
                matching = [
                    e
                    for e in received[b.node_id]
                    if (e.origin_node, e.topic, e.sequence)
                    == (env.origin_node, env.topic, env.sequence)
                ]
                if env.topic == "camera":
                    expected = 1 if b.node_id == src_id else 0
                elif env.topic.startswith("mission/"):
                    expected = 1
                else:  # status/* replicated but nobody subscribes to it
                    expected = 0
                assert len(matching) == expected


def make_fleet():
    broker = Broker("coord")
    return FleetCoordinator(["r1", "r2"], {1, 2, 3, 4, 5}, broker)


def test_dispatch_goal_happy_path():
    fleet = make_fleet()
    task = fleet.dispatch_task("r1", GOAL_POSE, [Pose2D(2, 1, 1.57)], tick=0)
    assert task.state == "executing"
    fleet.finish_task(task.id, tick=100)
    assert task.state == "completed"
    assert task.terminal_tick == 100


def test_dispatch_cancels_previous():
    fleet = make_fleet()
    first = fleet.dispatch_task("r1", GOAL_POSE, [Pose2D(1, 1, 0)], tick=0)
    second = fleet.dispatch_task("r1", GOAL_POSE, [Pose2D(2, 2, 0)], tick=5)
    assert first.state == "cancelled"
    assert second.state == "executing"


def test_dispatch_validation():
    fleet = make_fleet()
    with pytest.raises(UnknownRobot):
        fleet.dispatch_task("zz", GOAL_POSE, [Pose2D(0, 0, 0)])
    with pytest.raises(InvalidTask):
        fleet.dispatch_task("r1", WAYPOINT_SEQUENCE, [])


def test_label_task_completes_immediately():
    fleet = make_fleet()
    task = fleet.dispatch_task("r1", LABEL_POSE, [Pose2D(3, 2, 0)], text="Wounded Victim Here")
    assert task.state == "completed"
    assert fleet.mission.labels[0][1] == "Wounded Victim Here"


def test_task_never_leaves_terminal_state():
    fleet = make_fleet()
    task = fleet.dispatch_task("r1", GOAL_POSE, [Pose2D(1, 1, 0)], tick=0)
    fleet.finish_task(task.id, tick=10)
    fleet.finish_task(task.id, tick=20)  # no-op
    assert task.state == "completed" and task.terminal_tick == 10
    with pytest.raises(ValueError):
        task.transition("executing", 30)


def test_record_detection_first_wins():
    fleet = make_fleet()
    fleet.record_detection(1, "r1", 10)
    fleet.record_detection(1, "r2", 11)
    fleet.record_detection(2, "r1", 12)
    assert len(fleet.mission.found) == 2
    assert fleet.mission.finder[1] == "r1"


def test_mission_complete_event():
    fleet = make_fleet()
    events = []
    fleet.broker.subscribe("mission/*", lambda e: events.append(e.topic))
    for t in (1, 2, 3, 4, 5):
        fleet.record_detection(t, "r1", t)
    assert fleet.mission.summary() == "5 of 5 items found"
    assert "mission/complete" in events


def test_unknown_tag():
    fleet = make_fleet()
    with pytest.raises(UnknownTag):
        fleet.record_detection(99, "r1", 0)


def test_add_label_validation_and_append():
    fleet = make_fleet()
    fleet.add_label(Pose2D(3, 2, 0), "A", "operator")
    fleet.add_label(Pose2D(3, 2, 0), "B", "operator")
    assert len(fleet.mission.labels) == 2
    with pytest.raises(InvalidLabel):
        fleet.add_label(Pose2D(0, 0, 0), "", "operator")
    with pytest.raises(InvalidLabel):
        fleet.add_label(Pose2D(0, 0, 0), "x" * 257, "operator")


def test_found_count_monotone():
    fleet = make_fleet()
    counts = []
    fleet.broker.subscribe("mission/state", lambda e: counts.append(e.payload))
    for t, r in [(3, "r1"), (3, "r2"), (1, "r1"), (2, "r2"), (1, "r2")]:
        fleet.record_detection(t, r, 0)
    nums = [int(c.split(b" ")[0]) for c in counts]
    assert nums == sorted(nums)
