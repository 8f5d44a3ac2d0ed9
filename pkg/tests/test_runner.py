import json
import math
import os
import socket

import pytest

from fleetstation.errors import PortInUse, Timeout
from fleetstation.geometry import Pose2D
from fleetstation.runner import (
    RunRecord,
    System,
    load_script,
    metrics_lines,
    run_headless,
)
from fleetstation.scenario import load_scenario, load_scenario_text
from fleetstation.server import recv_message, send_message, serve

SCENARIOS = os.path.join(os.path.dirname(__file__), "..", "scenarios")

SMALL = """format_version 1
name cell
resolution 0.05
seed 3
param lidar_beams 90.0
param lidar_range 2.0
map
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
........................................
endmap
robot r1 1.0 0.5 0.0
tag 1 1.8 0.5 3.14
"""


def small_scenario():
    s = load_scenario_text(SMALL)
    # bound the map with walls so scans terminate
    s.occupied[0, :] = s.occupied[-1, :] = True
    s.occupied[:, 0] = s.occupied[:, -1] = True
    return s


def test_system_builds_and_steps():
    system = System(small_scenario())
    for _ in range(10):
        system.step()
    assert system.world.tick == 10
    assert system.merged_grid is not None


def test_mission_completes_and_record_shape():
    s = small_scenario()
    # tag is 0.8 m ahead of the spawn-facing robot: found without moving
    rec = run_headless(s, [], max_ticks=50)
    assert rec.completion_tick is not None
    assert rec.metrics["tag_found_tick"]["1"] == rec.completion_tick
    assert rec.format_version == 1
    assert set(rec.final_poses) == {"r1"}


def test_timeout_carries_partial_record():
    s = small_scenario()
    s.tags = [(1, Pose2D(0.3, 0.9, 0.0))]  # behind the robot, never seen
    with pytest.raises(Timeout) as e:
        run_headless(s, [], max_ticks=30)
    assert e.value.record.completion_tick is None


def test_record_round_trip():
    rec = run_headless(small_scenario(), [], max_ticks=50)
    again = RunRecord.from_json(rec.to_json())
    assert again == rec
    assert "completion_tick" in metrics_lines(rec)


def test_goal_task_drives_robot():
    system = System(small_scenario())
    sid = system.gateway.connect()
    # merged frame: world minus spawn (1.0, 0.5)
    reply = system.gateway.handle_message(
        sid, {"type": "set_goal", "robot": "r1", "pose": [0.6, 0.0, 0.0]}
    )
    assert reply["type"] == "ack"
    for _ in range(600):
        system.step()
        task = system.fleet.tasks[reply["task_id"]]
        if task.state == "completed":
            break
    assert task.state == "completed"
    p = system.world.robot("r1").pose_true
    assert math.hypot(p.x - 1.6, p.y - 0.5) < 0.15


def test_load_script(tmp_path):
    path = tmp_path / "s.jsonl"
    path.write_text(
        '# comment\n{"tick": 5, "msg": {"type": "hello"}}\n'
        '{"tick": 1, "msg": {"type": "list_robots"}}\n'
    )
    script = load_script(str(path))
    assert [c["tick"] for c in script] == [1, 5]


def test_bundled_corridor_mission():
    scenario = load_scenario(os.path.join(SCENARIOS, "corridor.scn"))
    script = load_script(os.path.join(SCENARIOS, "corridor_mission.jsonl"))
    rec = run_headless(scenario, script, max_ticks=4000)
    assert rec.metrics["task_counts"] == {"completed": 2}
    assert len(rec.metrics["tag_found_tick"]) == 5


def test_serve_round_trip():
    server = serve(small_scenario(), port=0, realtime=False)
    try:
        sock = socket.create_connection(("127.0.0.1", server.port), timeout=5)
        send_message(sock, {"type": "list_robots"})
        # stream frames (e.g. merged_map) may interleave with the reply
        for _ in range(100):
            reply = recv_message(sock)
            if reply is None or reply["type"] == "robot_list":
                break
        assert reply == {"type": "robot_list", "robots": ["r1"]}
        sock.close()
    finally:
        server.stop()


def test_port_in_use():
    server = serve(small_scenario(), port=0, realtime=False)
    try:
        with pytest.raises(PortInUse):
            serve(small_scenario(), port=server.port)
    finally:
        server.stop()
