"""Run the bundled corridor search mission headless and narrate it.

Two robots sweep a three-room floor plan for five colored tags, publish
detections over the replicated mission topics, and return to their spawns.
The whole run is deterministic: same scenario + script + seed, same record.

Run from the repository root: ``python3 demos/drive_mission.py``
"""
import os

from fleetstation.runner import load_script, metrics_lines, run_headless
from fleetstation.scenario import load_scenario

HERE = os.path.dirname(__file__)
SCENARIOS = os.path.join(HERE, "..", "scenarios")


def main():
    scenario = load_scenario(os.path.join(SCENARIOS, "corridor.scn"))
    script = load_script(os.path.join(SCENARIOS, "corridor_mission.jsonl"))
    print(f"scenario {scenario.name!r}: "
          f"{len(scenario.robots)} robots, {len(scenario.tags)} tags")

    record = run_headless(scenario, script, max_ticks=4000)

    dt = 0.05
    for tag, tick in sorted(record.metrics["tag_found_tick"].items(), key=lambda kv: kv[1]):
        print(f"  t={tick * dt:6.2f}s  found tag {tag}")
    print(f"  t={record.completion_tick * dt:6.2f}s  mission complete (5 of 5)")
    print(f"  t={record.return_tick * dt:6.2f}s  both robots home")
    print()
    print(metrics_lines(record), end="")
    print("\nfinal poses (world frame):")
    for rid, (x, y, th) in sorted(record.final_poses.items()):
        print(f"  {rid}: ({x:.3f}, {y:.3f}, {th:+.3f})")


if __name__ == "__main__":
    main()
