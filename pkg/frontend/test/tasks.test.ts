import { describe, expect, it } from "vitest";

import { downsampleStroke, GoalPlacement, WaypointCollector } from "../src/tasks.js";

describe("goal placement", () => {
  it("click then drag to 90 degrees", () => {
    const placement = new GoalPlacement();
    placement.click(2, 1);
    placement.dragTo(2, 3); // straight up
    expect(placement.readoutDegrees()).toBe(90);
    const pose = placement.confirm();
    expect(pose).not.toBeNull();
    expect(pose!.x).toBe(2);
    expect(pose!.y).toBe(1);
    expect(pose!.theta).toBeCloseTo(Math.PI / 2, 10);
    expect(placement.draft).toBeNull();
  });

  it("tiny drags do not disturb the heading", () => {
    const placement = new GoalPlacement();
    placement.click(0, 0);
    placement.dragTo(1, 0);
    placement.dragTo(0, 0); // back onto the anchor: keep previous heading
    expect(placement.confirm()!.theta).toBe(0);
  });
});

describe("waypoint collection", () => {
  it("accumulates clicks in order and clears on confirm", () => {
    const collector = new WaypointCollector();
    collector.click(1, 1);
    collector.click(2, 1);
    collector.click(3, 2);
    const poses = collector.confirm();
    expect(poses.map((p) => [p.x, p.y])).toEqual([
      [1, 1],
      [2, 1],
      [3, 2],
    ]);
    expect(collector.points).toEqual([]);
  });

  it("undo removes the latest click", () => {
    const collector = new WaypointCollector();
    collector.click(1, 1);
    collector.click(9, 9);
    collector.undo();
    expect(collector.confirm().length).toBe(1);
  });
});

describe("stroke downsampling", () => {
  it("200 raw points over 4 m give at most 9 poses", () => {
    const stroke = Array.from({ length: 200 }, (_, i) => ({
      x: (4 * i) / 199,
      y: 0,
      theta: 0,
    }));
    const poses = downsampleStroke(stroke, 0.5);
    expect(poses.length).toBeLessThanOrEqual(9);
    expect(poses[0].x).toBeCloseTo(0, 10);
    expect(poses[poses.length - 1].x).toBeCloseTo(4, 10);
  });

  it("spacing between consecutive poses never exceeds 0.5 m", () => {
    // wiggly stroke
    const stroke = Array.from({ length: 300 }, (_, i) => ({
      x: i * 0.02,
      y: Math.sin(i * 0.15),
      theta: 0,
    }));
    const poses = downsampleStroke(stroke, 0.5);
    for (let i = 1; i < poses.length; i++) {
      const step = Math.hypot(poses[i].x - poses[i - 1].x, poses[i].y - poses[i - 1].y);
      expect(step).toBeLessThanOrEqual(0.5 + 1e-9);
    }
  });

  it("keeps short strokes intact", () => {
    expect(downsampleStroke([], 0.5)).toEqual([]);
    const single = [{ x: 1, y: 2, theta: 0 }];
    expect(downsampleStroke(single, 0.5)).toEqual(single);
  });
});
