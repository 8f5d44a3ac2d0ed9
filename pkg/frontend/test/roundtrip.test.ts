/**
 * Console round-trip acceptance: a scripted operator session emits
 * exactly the expected protocol message sequence against a mock gateway,
 * and the scene reflects masked beams and mission count updates.
 */
import { describe, expect, it } from "vitest";

import { GatewayClient } from "../src/client.js";
import { renderMinimap } from "../src/minimap.js";
import { GoalPlacement } from "../src/tasks.js";
import { TeleopInput } from "../src/teleop.js";
import { MockGateway } from "./mockGateway.js";

describe("scripted operator session", () => {
  it("emits exactly the expected message sequence", async () => {
    const gateway = new MockGateway(["r1", "r2"]);
    const client = new GatewayClient(gateway);
    const teleopKeys = new TeleopInput();

    // connect and discover the fleet
    await client.hello();
    await client.listRobots();
    expect(client.store.robots).toEqual(["r1", "r2"]);

    // select r1 and toggle its scan overlay on
    client.store.selectRobot("r1");
    expect(client.store.panelVisible).toBe(true);
    await client.toggleStream("r1", "scan");

    // place a goal at (2, 1) and drag the arrow to 90 degrees
    const placement = new GoalPlacement();
    placement.click(2, 1);
    placement.dragTo(2, 2.5);
    expect(placement.readoutDegrees()).toBe(90);
    const goalReply = await client.setGoal("r1", placement.confirm()!);
    expect(goalReply.type).toBe("ack");

    // claim teleop, drive forward, step the speed, reset, release
    await client.teleopClaim("r1");
    expect(client.store.teleop.claimedRobot).toBe("r1");
    await client.teleopEvent("speed_up_linear");
    expect(client.store.teleop.linearSet).toBeCloseTo(0.3, 10);
    const press = teleopKeys.keyDown("w")!;
    await client.teleopEvent(press.event, press.value);
    expect(gateway.twist[0]).toBeCloseTo(0.3, 10);
    expect(gateway.twist[1]).toBe(0);
    const lift = teleopKeys.keyUp("w")!;
    await client.teleopEvent(lift.event, lift.value);
    expect(gateway.twist).toEqual([0, 0]);
    await client.teleopEvent("reset");
    expect(client.store.teleop.linearSet).toBeCloseTo(0.2, 10);
    await client.teleopRelease();
    expect(client.store.teleop.claimedRobot).toBeNull();

    expect(gateway.sent).toEqual([
      { type: "hello" },
      { type: "list_robots" },
      { type: "toggle_stream", robot: "r1", stream: "scan", enable: true },
      { type: "set_goal", robot: "r1", pose: [2, 1, Math.PI / 2] },
      { type: "teleop_claim", robot: "r1", mode: "minimap" },
      { type: "teleop_event", event: "speed_up_linear" },
      { type: "teleop_event", event: "engage_linear", value: true },
      { type: "teleop_event", event: "engage_linear", value: false },
      { type: "teleop_event", event: "reset" },
      { type: "teleop_release" },
    ]);
  });

  it("renders red points for masked beams and the mission banner", async () => {
    const gateway = new MockGateway(["r1"]);
    const client = new GatewayClient(gateway);
    await client.listRobots();
    client.store.selectRobot("r1");
    client.store.overlaysFor("r1").scan = true;

    gateway.emit({
      type: "status",
      robot: "r1",
      battery: 1,
      velocity: [0, 0],
      pose: [0, 0, 0],
      task_state: "idle",
      active_task_id: null,
    });
    gateway.emit({
      type: "scan",
      robot: "r1",
      angle_min: -Math.PI,
      angle_increment: Math.PI,
      ranges: [0.3, 1.2],
      proximity_mask: [true, false],
    });
    gateway.emit({ type: "mission_state", found: 2, total: 5 });

    const scene = renderMinimap(client.store);
    const colors = scene
      .filter((p) => p.kind === "scan_point")
      .map((p) => (p as { color: string }).color);
    expect(colors).toEqual(["red", "normal"]);
    const banner = scene.find((p) => p.kind === "banner");
    expect(banner).toEqual({ kind: "banner", text: "2 of 5 items found" });
  });

  it("denied claim records the holder and keeps controls unclaimed", async () => {
    const gateway = new MockGateway(["r1"]);
    const holder = new GatewayClient(gateway);
    await holder.teleopClaim("r1");

    // second operator: separate session, separate store
    const rival = new GatewayClient(gateway.session());
    const reply = await rival.teleopClaim("r1");
    expect(reply.type).toBe("error");
    expect(rival.store.teleop.claimedRobot).toBeNull();
    expect(rival.store.teleop.deniedBy).not.toBeNull();
  });

  it("shows the reconnect banner after the connection drops", async () => {
    const gateway = new MockGateway(["r1"]);
    const client = new GatewayClient(gateway);
    await client.hello();
    gateway.close();
    expect(renderMinimap(client.store)).toEqual([{ kind: "reconnect_banner" }]);
  });
});
