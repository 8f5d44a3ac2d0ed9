/**
 * Gateway wire protocol: length-delimited UTF-8 JSON.
 *
 * Every frame is a 4-byte big-endian byte count followed by one flat JSON
 * object with a `type` field. This module owns the framing and the message
 * vocabulary; it knows nothing about sockets or UI.
 */

export interface Pose {
  x: number;
  y: number;
  theta: number;
}

export type InboundType =
  | "hello"
  | "list_robots"
  | "toggle_stream"
  | "set_goal"
  | "set_waypoints"
  | "label_pose"
  | "draw_plan"
  | "teleop_claim"
  | "teleop_release"
  | "teleop_event"
  | "cancel_task";

export interface StatusMessage {
  type: "status";
  robot: string;
  battery: number;
  velocity: [number, number];
  pose: [number, number, number];
  task_state: string;
  active_task_id: string | null;
}

export interface ScanMessage {
  type: "scan";
  robot: string;
  angle_min: number;
  angle_increment: number;
  ranges: (number | null)[];
  proximity_mask: boolean[];
}

export interface CameraMessage {
  type: "camera";
  robot: string;
  width: number;
  height: number;
  rgb_base64: string;
  visible_tags: [number, [number, number, number, number]][];
}

export interface PathMessage {
  type: "path";
  robot: string;
  poses: [number, number, number][];
}

export interface MergedMapMessage {
  type: "merged_map";
  grid_base64: string;
}

export interface MissionStateMessage {
  type: "mission_state";
  found: number;
  total: number;
}

export interface LabelAddedMessage {
  type: "label_added";
  pose: [number, number, number];
  text: string;
}

export interface TaskUpdateMessage {
  type: "task_update";
  task_id: string;
  state: string;
}

export interface AckMessage {
  type: "ack";
  ok: boolean;
  task_id?: string;
  robot?: string;
  linear_set?: number;
  angular_set?: number;
  server?: string;
}

export interface ErrorMessage {
  type: "error";
  error: string;
  detail?: string;
}

export interface RobotListMessage {
  type: "robot_list";
  robots: string[];
}

export type ServerMessage =
  | StatusMessage
  | ScanMessage
  | CameraMessage
  | PathMessage
  | MergedMapMessage
  | MissionStateMessage
  | LabelAddedMessage
  | TaskUpdateMessage
  | AckMessage
  | ErrorMessage
  | RobotListMessage;

export interface ClientMessage {
  type: InboundType;
  [key: string]: unknown;
}

const encoder = new TextEncoder();
const decoder = new TextDecoder();

/** Frame one message: 4-byte big-endian length prefix + UTF-8 JSON body. */
export function encodeFrame(message: ClientMessage): Uint8Array {
  const body = encoder.encode(JSON.stringify(message));
  const frame = new Uint8Array(4 + body.length);
  new DataView(frame.buffer).setUint32(0, body.length, false);
  frame.set(body, 4);
  return frame;
}

/**
 * Incremental frame decoder. Feed raw bytes as they arrive; complete
 * messages come back in order, partial frames are buffered.
 */
export class FrameDecoder {
  private buffer = new Uint8Array(0);

  feed(chunk: Uint8Array): ServerMessage[] {
    const joined = new Uint8Array(this.buffer.length + chunk.length);
    joined.set(this.buffer);
    joined.set(chunk, this.buffer.length);
    this.buffer = joined;

    const out: ServerMessage[] = [];
    for (;;) {
      if (this.buffer.length < 4) break;
      const view = new DataView(this.buffer.buffer, this.buffer.byteOffset);
      const length = view.getUint32(0, false);
      if (this.buffer.length < 4 + length) break;
      const body = this.buffer.subarray(4, 4 + length);
      out.push(JSON.parse(decoder.decode(body)) as ServerMessage);
      this.buffer = this.buffer.slice(4 + length);
    }
    return out;
  }
}
