export { GatewayClient, type Transport } from "./client.js";
export {
  clampToScreen,
  renderMinimap,
  screenToWorld,
  worldToScreen,
  type Primitive,
  type Rect,
} from "./minimap.js";
export {
  encodeFrame,
  FrameDecoder,
  type ClientMessage,
  type Pose,
  type ServerMessage,
} from "./protocol.js";
export { ConsoleStore, defaultOverlays, type ViewState, type Viewport } from "./store.js";
export { downsampleStroke, GoalPlacement, WaypointCollector } from "./tasks.js";
export { formatSetPoints, TeleopInput, type TeleopEventOut } from "./teleop.js";
