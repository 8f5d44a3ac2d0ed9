"""Command-line entry point: serve, run, replay, merge-demo."""
from __future__ import annotations

import argparse
import sys
import time

from .errors import FleetStationError, Timeout
from .geometry import Transform2D
from .mapping import deserialize_grid, probability_grid
from .merging import estimate_alignment
from .runner import RunRecord, load_script, metrics_lines, replay, run_headless
from .scenario import load_scenario
from .server import DEFAULT_PORT, serve


def _cmd_serve(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    server = serve(scenario, args.port)
    print(f"serving scenario {scenario.name!r} on port {server.port}")
    try:
        while True:
            time.sleep(1.0)
    except KeyboardInterrupt:
        print("shutting down")
        server.stop()
    return 0


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    script = load_script(args.script)
    try:
        record = run_headless(scenario, script)
    except Timeout as e:
        print(f"timeout: {e}", file=sys.stderr)
        record = e.record
        code = 1
    else:
        code = 0
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(record.to_json())
    print(metrics_lines(record), end="")
    return code


def _cmd_replay(args) -> int:
    with open(args.record, "r", encoding="utf-8") as f:
        record = RunRecord.from_json(f.read())
    scenario = load_scenario(args.scenario)
    new = replay(record, scenario)
    drift = max(
        abs(a - b)
        for rid in record.final_poses
        for a, b in zip(record.final_poses[rid], new.final_poses[rid])
    )
    print(metrics_lines(new), end="")
    print(f"replay_max_pose_drift {drift}")
    return 0 if drift <= 1e-9 else 1


def _cmd_merge_demo(args) -> int:
    with open(args.a, "rb") as f:
        grid_a = deserialize_grid(f.read())
    with open(args.b, "rb") as f:
        grid_b = deserialize_grid(f.read())
    grids = {"a": grid_a, "b": grid_b}
    identity = {"a": Transform2D(0.0, 0.0, 0.0), "b": Transform2D(0.0, 0.0, 0.0)}
    estimates = estimate_alignment(grids, identity)
    for rid, est in estimates.items():
        print(
            f"{rid}: refinement=({est.refinement[0]}, {est.refinement[1]}) cells "
            f"confidence={est.confidence:.3f}"
        )
    occupied = {rid: int((probability_grid(g) >= 0.65).sum()) for rid, g in grids.items()}
    print(f"occupied cells: a={occupied['a']} b={occupied['b']}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fleetstation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run a live gateway server for a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("run", help="execute a scripted mission headless")
    p.add_argument("--scenario", required=True)
    p.add_argument("--script", required=True)
    p.add_argument("--out", default=None, help="write the RunRecord here")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("replay", help="re-run a RunRecord and check determinism")
    p.add_argument("--record", required=True)
    p.add_argument("--scenario", required=True)
    p.set_defaults(fn=_cmd_replay)

    p = sub.add_parser("merge-demo", help="align two serialized grids")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(fn=_cmd_merge_demo)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FleetStationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
