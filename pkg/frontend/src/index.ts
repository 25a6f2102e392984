export {
  PROTOCOL_VERSION,
  MSG_HELLO,
  MSG_SCENE_SNAPSHOT,
  MSG_EVENT,
  MSG_ACK,
  MSG_FRAME,
  MSG_HOVER,
  MAX_MESSAGE_BYTES,
  EVENT_BYTES,
  DEVICES,
  BUTTON_FLAGS,
  HANDLE_KINDS,
  ProtocolError,
  MessageReader,
  encodeMessage,
  encodeHello,
  decodeHello,
  encodeEvent,
  decodeEvent,
  decodeAck,
  decodeHover,
  decodeFrame,
  formatEvent,
  formatEventLog,
} from "./protocol.js";
export type {
  Device,
  ButtonFlag,
  HandleKind,
  WireEvent,
  Ack,
  Hover,
  FramePacket,
  Message,
} from "./protocol.js";

export { EngineConnection, VersionMismatchError } from "./connection.js";
export type { ConnectOptions } from "./connection.js";

export { FrameStore } from "./frames.js";

export { PointerMapping } from "./pointer.js";
export type { PointerInput } from "./pointer.js";

export { SceneFormatError, parseSceneSummary } from "./scene.js";
export type { SceneCamera, SceneLens, SceneSummary } from "./scene.js";

export {
  ATTRIBUTE_TOGGLES,
  MODE_TOGGLES,
  handleWorldPositions,
  projectPoint,
  renderOverlay,
} from "./overlay.js";
export type {
  BadgeMark,
  HandleMark,
  OverlayDrawList,
  ToggleMark,
} from "./overlay.js";

export { WorkbenchSession } from "./session.js";
export type { SessionOptions, UiMode } from "./session.js";
