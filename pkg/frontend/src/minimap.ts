/**
 * Mini-map scene builder: turns the latest store state into a flat list
 * of draw primitives. The canvas layer just rasterizes the list, which
 * keeps every visual rule (red proximity points, banner text, overlay
 * toggles) unit-testable without a DOM.
 */

import type { ConsoleStore, Viewport } from "./store.js";

export type Primitive =
  | { kind: "grid"; base64: string }
  | { kind: "robot"; robot: string; x: number; y: number; theta: number; selected: boolean }
  | { kind: "scan_point"; robot: string; x: number; y: number; color: "normal" | "red" }
  | { kind: "path"; robot: string; points: [number, number][] }
  | { kind: "label"; x: number; y: number; text: string }
  | { kind: "banner"; text: string }
  | { kind: "reconnect_banner" };

export function worldToScreen(vp: Viewport, x: number, y: number): [number, number] {
  return [
    vp.width / 2 + (x - vp.centerX) * vp.scale,
    vp.height / 2 - (y - vp.centerY) * vp.scale,
  ];
}

export function screenToWorld(vp: Viewport, sx: number, sy: number): [number, number] {
  return [
    vp.centerX + (sx - vp.width / 2) / vp.scale,
    vp.centerY - (sy - vp.height / 2) / vp.scale,
  ];
}

export function renderMinimap(store: ConsoleStore): Primitive[] {
  const out: Primitive[] = [];
  if (!store.connected) {
    out.push({ kind: "reconnect_banner" });
    return out;
  }
  if (store.mergedMapBase64 !== null) {
    out.push({ kind: "grid", base64: store.mergedMapBase64 });
  }

  for (const [robot, status] of store.statuses) {
    const [x, y, theta] = status.pose;
    out.push({
      kind: "robot",
      robot,
      x,
      y,
      theta,
      selected: robot === store.view.selectedRobot,
    });
  }

  for (const [robot, toggles] of store.view.overlays) {
    const status = store.statuses.get(robot);
    if (status === undefined) continue;
    const [rx, ry, rtheta] = status.pose;

    if (toggles.scan) {
      const scan = store.scans.get(robot);
      if (scan !== undefined) {
        scan.ranges.forEach((range, i) => {
          if (range === null) return;
          const angle = rtheta + scan.angle_min + i * scan.angle_increment;
          out.push({
            kind: "scan_point",
            robot,
            x: rx + range * Math.cos(angle),
            y: ry + range * Math.sin(angle),
            color: scan.proximity_mask[i] ? "red" : "normal",
          });
        });
      }
    }

    if (toggles.path) {
      const path = store.paths.get(robot);
      if (path !== undefined && path.poses.length > 0) {
        out.push({
          kind: "path",
          robot,
          points: path.poses.map(([x, y]) => [x, y] as [number, number]),
        });
      }
    }

  }

  // label pins are world annotations, not per-robot data: shown unless the
  // selected robot's overlay settings hide them
  const selected = store.view.selectedRobot;
  const labelsOn = selected === null ? true : store.overlaysFor(selected).labels;
  if (labelsOn) {
    for (const label of store.labels) {
      out.push({ kind: "label", x: label.pose[0], y: label.pose[1], text: label.text });
    }
  }

  if (store.mission.total > 0) {
    out.push({
      kind: "banner",
      text: `${store.mission.found} of ${store.mission.total} items found`,
    });
  }
  return out;
}

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

/**
 * Keep a floating window (overhead camera, Robot Manager panel) fully
 * on-screen regardless of where pan/zoom put its anchor.
 */
export function clampToScreen(panel: Rect, vp: Viewport): Rect {
  const x = Math.min(Math.max(panel.x, 0), Math.max(0, vp.width - panel.width));
  const y = Math.min(Math.max(panel.y, 0), Math.max(0, vp.height - panel.height));
  return { ...panel, x, y };
}
