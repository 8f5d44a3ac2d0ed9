/**
 * Gateway client: one persistent connection, exactly one protocol message
 * per user action, replies correlated in order (the gateway answers every
 * inbound message with exactly one ack/error/robot_list).
 */

import type { ClientMessage, Pose, ServerMessage } from "./protocol.js";
import { ConsoleStore } from "./store.js";
import { downsampleStroke } from "./tasks.js";

export interface Transport {
  send(message: ClientMessage): void;
  onMessage(handler: (message: ServerMessage) => void): void;
  onClose(handler: () => void): void;
}

const REPLY_TYPES = new Set(["ack", "error", "robot_list"]);

export class GatewayClient {
  readonly store: ConsoleStore;
  private transport: Transport;
  private pending: ((reply: ServerMessage) => void)[] = [];

  constructor(transport: Transport, store = new ConsoleStore()) {
    this.store = store;
    this.transport = transport;
    transport.onMessage((m) => this.receive(m));
    transport.onClose(() => {
      this.store.connected = false;
    });
    this.store.connected = true;
  }

  private receive(message: ServerMessage): void {
    if (REPLY_TYPES.has(message.type) && this.pending.length > 0) {
      const resolve = this.pending.shift()!;
      this.store.apply(message);
      resolve(message);
      return;
    }
    this.store.apply(message);
  }

  private request(message: ClientMessage): Promise<ServerMessage> {
    return new Promise((resolve) => {
      this.pending.push(resolve);
      this.transport.send(message);
    });
  }

  hello(): Promise<ServerMessage> {
    return this.request({ type: "hello" });
  }

  listRobots(): Promise<ServerMessage> {
    return this.request({ type: "list_robots" });
  }

  toggleStream(robot: string, stream: string, enable = true): Promise<ServerMessage> {
    return this.request({ type: "toggle_stream", robot, stream, enable });
  }

  setGoal(robot: string, pose: Pose): Promise<ServerMessage> {
    return this.request({
      type: "set_goal",
      robot,
      pose: [pose.x, pose.y, pose.theta],
    });
  }

  setWaypoints(robot: string, poses: Pose[]): Promise<ServerMessage> {
    return this.request({
      type: "set_waypoints",
      robot,
      poses: poses.map((p) => [p.x, p.y, p.theta]),
    });
  }

  labelPose(robot: string | null, pose: Pose, text: string): Promise<ServerMessage> {
    const message: ClientMessage = {
      type: "label_pose",
      pose: [pose.x, pose.y, pose.theta],
      text,
    };
    if (robot !== null) message.robot = robot;
    return this.request(message);
  }

  /** Freehand stroke: downsampled to <= 0.5 m spacing before sending. */
  drawPlan(robot: string, stroke: Pose[]): Promise<ServerMessage> {
    const poses = downsampleStroke(stroke, 0.5);
    return this.request({
      type: "draw_plan",
      robot,
      poses: poses.map((p) => [p.x, p.y, p.theta]),
    });
  }

  async teleopClaim(robot: string, mode = "minimap"): Promise<ServerMessage> {
    const reply = await this.request({ type: "teleop_claim", robot, mode });
    if (reply.type === "ack") {
      this.store.teleop.claimedRobot = robot;
      this.store.teleop.deniedBy = null;
    }
    return reply;
  }

  async teleopRelease(): Promise<ServerMessage> {
    const reply = await this.request({ type: "teleop_release" });
    if (reply.type === "ack") {
      this.store.teleop.claimedRobot = null;
    }
    return reply;
  }

  teleopEvent(event: string, value?: boolean): Promise<ServerMessage> {
    const message: ClientMessage = { type: "teleop_event", event };
    if (value !== undefined) message.value = value;
    return this.request(message);
  }

  cancelTask(taskId: string): Promise<ServerMessage> {
    return this.request({ type: "cancel_task", task_id: taskId });
  }
}
