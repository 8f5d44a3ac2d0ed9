/**
 * Latest-value console state.
 *
 * Server-owned state (poses, scans, mission count, teleop set-points) is
 * only ever changed by applying a server message — the panels never guess.
 * View-local state (selection, overlay toggles, viewport) lives in
 * ViewState and never shadows anything the server reports.
 */

import type {
  CameraMessage,
  PathMessage,
  ScanMessage,
  ServerMessage,
  StatusMessage,
} from "./protocol.js";

export type CameraMode = "projected" | "overhead" | "off";

export interface OverlayToggles {
  scan: boolean;
  camera: CameraMode;
  path: boolean;
  labels: boolean;
}

export interface Viewport {
  centerX: number;
  centerY: number;
  /** pixels per meter */
  scale: number;
  width: number;
  height: number;
}

export type Tab = "status" | "dataviz" | "tasks" | "teleop";

export interface ViewState {
  viewport: Viewport;
  selectedRobot: string | null;
  overlays: Map<string, OverlayToggles>;
  activeTab: Tab;
  teleopMode: "minimap" | "semi-immersive";
}

export interface TeleopPanelState {
  claimedRobot: string | null;
  linearSet: number;
  angularSet: number;
  deniedBy: string | null;
}

export interface Label {
  pose: [number, number, number];
  text: string;
}

export function defaultOverlays(): OverlayToggles {
  return { scan: false, camera: "off", path: false, labels: true };
}

export class ConsoleStore {
  connected = false;
  robots: string[] = [];
  statuses = new Map<string, StatusMessage>();
  scans = new Map<string, ScanMessage>();
  cameras = new Map<string, CameraMessage>();
  paths = new Map<string, PathMessage>();
  mergedMapBase64: string | null = null;
  mission = { found: 0, total: 0 };
  labels: Label[] = [];
  taskStates = new Map<string, string>();
  teleop: TeleopPanelState = {
    claimedRobot: null,
    linearSet: 0.2,
    angularSet: 0.5,
    deniedBy: null,
  };
  lastError: string | null = null;

  view: ViewState = {
    viewport: { centerX: 0, centerY: 0, scale: 100, width: 1280, height: 800 },
    selectedRobot: null,
    overlays: new Map(),
    activeTab: "status",
    teleopMode: "minimap",
  };

  /** Robot Manager panel is visible iff a robot is selected. */
  get panelVisible(): boolean {
    return this.view.selectedRobot !== null;
  }

  selectRobot(robot: string | null): void {
    this.view.selectedRobot = robot;
    if (robot !== null && !this.view.overlays.has(robot)) {
      this.view.overlays.set(robot, defaultOverlays());
    }
  }

  overlaysFor(robot: string): OverlayToggles {
    let toggles = this.view.overlays.get(robot);
    if (toggles === undefined) {
      toggles = defaultOverlays();
      this.view.overlays.set(robot, toggles);
    }
    return toggles;
  }

  apply(message: ServerMessage): void {
    switch (message.type) {
      case "robot_list":
        this.robots = message.robots;
        break;
      case "status":
        this.statuses.set(message.robot, message);
        break;
      case "scan":
        this.scans.set(message.robot, message);
        break;
      case "camera":
        this.cameras.set(message.robot, message);
        break;
      case "path":
        this.paths.set(message.robot, message);
        break;
      case "merged_map":
        this.mergedMapBase64 = message.grid_base64;
        break;
      case "mission_state":
        this.mission = { found: message.found, total: message.total };
        break;
      case "label_added":
        this.labels.push({ pose: message.pose, text: message.text });
        break;
      case "task_update":
        this.taskStates.set(message.task_id, message.state);
        break;
      case "ack":
        if (message.linear_set !== undefined) this.teleop.linearSet = message.linear_set;
        if (message.angular_set !== undefined) this.teleop.angularSet = message.angular_set;
        break;
      case "error":
        this.lastError = message.error;
        if (message.error === "teleop_denied") {
          this.teleop.deniedBy = message.detail ?? "another operator";
        }
        break;
    }
  }
}
