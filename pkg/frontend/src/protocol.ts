/**
 * Wire protocol for the lens engine: length-prefixed binary messages over a
 * local TCP socket. Layouts mirror the engine codec byte for byte; every
 * integer is little-endian and the u32 length prefix counts the kind byte
 * plus the payload.
 */

export const PROTOCOL_VERSION = 1;

export const MSG_HELLO = 1;
export const MSG_SCENE_SNAPSHOT = 2;
export const MSG_EVENT = 3;
export const MSG_ACK = 4;
export const MSG_FRAME = 5;
export const MSG_HOVER = 6;

export const MAX_MESSAGE_BYTES = 64 * 1024 * 1024;

export const DEVICES = ["primary", "secondary"] as const;
export type Device = (typeof DEVICES)[number];

/** Order fixes the wire bitmask (bit i) and the event-log column order. */
export const BUTTON_FLAGS = [
  "grip_pressed",
  "trigger_pressed",
  "trigger_released",
  "toggle_attribute",
  "cycle_mode",
  "toggle_lock",
] as const;
export type ButtonFlag = (typeof BUTTON_FLAGS)[number];

export const HANDLE_KINDS = [
  "origin",
  "k1_pos",
  "k1_neg",
  "k2_pos",
  "k2_neg",
] as const;
export type HandleKind = (typeof HANDLE_KINDS)[number];

export interface WireEvent {
  /** Integer milliseconds, non-decreasing per device. */
  timestamp: number;
  device: Device;
  position: [number, number, number];
  /** Unit quaternion (w, x, y, z). */
  orientation: [number, number, number, number];
  buttons: readonly ButtonFlag[];
}

export interface Ack {
  seq: number;
  stateVersion: number;
}

export interface Hover {
  lensId: number;
  kind: HandleKind;
}

export interface FramePacket {
  stateVersion: number;
  width: number;
  height: number;
  /** RGBA8 rows, top to bottom. */
  pixels: Uint8Array;
}

export class ProtocolError extends Error {}

// u64 timestamp, u8 device, 7 f64 (position then quaternion), u16 flag
// bits, packed without padding.
export const EVENT_BYTES = 67;
const HELLO_BYTES = 4;
const ACK_BYTES = 8;
const HOVER_BYTES = 6;
const FRAME_HEAD_BYTES = 12;

function view(bytes: Uint8Array): DataView {
  return new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
}

export function encodeMessage(
  kind: number,
  payload: Uint8Array = new Uint8Array(0),
): Uint8Array {
  if (!Number.isInteger(kind) || kind < 0 || kind > 255) {
    throw new ProtocolError(`message kind ${kind} out of range`);
  }
  const out = new Uint8Array(5 + payload.length);
  view(out).setUint32(0, payload.length + 1, true);
  out[4] = kind;
  out.set(payload, 5);
  return out;
}

export function encodeHello(version: number): Uint8Array {
  const out = new Uint8Array(HELLO_BYTES);
  view(out).setUint32(0, version >>> 0, true);
  return out;
}

export function decodeHello(payload: Uint8Array): number {
  if (payload.length !== HELLO_BYTES) {
    throw new ProtocolError(
      `HELLO payload must be ${HELLO_BYTES} bytes, got ${payload.length}`,
    );
  }
  return view(payload).getUint32(0, true);
}

export function encodeEvent(event: WireEvent): Uint8Array {
  if (!Number.isInteger(event.timestamp) || event.timestamp < 0) {
    throw new ProtocolError(`timestamp must be a non-negative integer, got ${event.timestamp}`);
  }
  const device = DEVICES.indexOf(event.device);
  if (device < 0) throw new ProtocolError(`unknown device ${event.device}`);
  const out = new Uint8Array(EVENT_BYTES);
  const v = view(out);
  v.setBigUint64(0, BigInt(event.timestamp), true);
  v.setUint8(8, device);
  const reals = [...event.position, ...event.orientation];
  reals.forEach((value, i) => v.setFloat64(9 + 8 * i, value, true));
  let flags = 0;
  for (const name of event.buttons) {
    const bit = BUTTON_FLAGS.indexOf(name);
    if (bit < 0) throw new ProtocolError(`unknown button flag ${name}`);
    flags |= 1 << bit;
  }
  v.setUint16(65, flags, true);
  return out;
}

export function decodeEvent(payload: Uint8Array): WireEvent {
  if (payload.length !== EVENT_BYTES) {
    throw new ProtocolError(
      `EVENT payload must be ${EVENT_BYTES} bytes, got ${payload.length}`,
    );
  }
  const v = view(payload);
  const ts = v.getBigUint64(0, true);
  if (ts > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new ProtocolError(`timestamp ${ts} exceeds the safe integer range`);
  }
  const device = DEVICES[v.getUint8(8)];
  if (device === undefined) {
    throw new ProtocolError(`unknown device code ${v.getUint8(8)}`);
  }
  const reals: number[] = [];
  for (let i = 0; i < 7; i++) reals.push(v.getFloat64(9 + 8 * i, true));
  const flags = v.getUint16(65, true);
  if (flags >> BUTTON_FLAGS.length !== 0) {
    throw new ProtocolError(`unknown button bits in 0x${flags.toString(16)}`);
  }
  return {
    timestamp: Number(ts),
    device,
    position: [reals[0]!, reals[1]!, reals[2]!],
    orientation: [reals[3]!, reals[4]!, reals[5]!, reals[6]!],
    buttons: BUTTON_FLAGS.filter((_, bit) => flags & (1 << bit)),
  };
}

export function decodeAck(payload: Uint8Array): Ack {
  if (payload.length !== ACK_BYTES) {
    throw new ProtocolError(`ACK payload must be ${ACK_BYTES} bytes, got ${payload.length}`);
  }
  const v = view(payload);
  return { seq: v.getUint32(0, true), stateVersion: v.getUint32(4, true) };
}

export function decodeHover(payload: Uint8Array): Hover | null {
  if (payload.length !== HOVER_BYTES) {
    throw new ProtocolError(
      `HOVER payload must be ${HOVER_BYTES} bytes, got ${payload.length}`,
    );
  }
  const v = view(payload);
  if (v.getUint8(0) === 0) return null;
  const kind = HANDLE_KINDS[v.getUint8(5)];
  if (kind === undefined) {
    throw new ProtocolError(`unknown handle kind code ${v.getUint8(5)}`);
  }
  return { lensId: v.getUint32(1, true), kind };
}

export function decodeFrame(payload: Uint8Array): FramePacket {
  if (payload.length < FRAME_HEAD_BYTES) {
    throw new ProtocolError(`FRAME payload of ${payload.length} bytes has no header`);
  }
  const v = view(payload);
  const stateVersion = v.getUint32(0, true);
  const width = v.getUint32(4, true);
  const height = v.getUint32(8, true);
  const expected = FRAME_HEAD_BYTES + width * height * 4;
  if (payload.length !== expected) {
    throw new ProtocolError(
      `FRAME of ${width}x${height} needs ${expected} bytes, got ${payload.length}`,
    );
  }
  return {
    stateVersion,
    width,
    height,
    pixels: payload.subarray(FRAME_HEAD_BYTES),
  };
}

export interface Message {
  kind: number;
  payload: Uint8Array;
}

/** Incremental splitter for the raw TCP byte stream. */
export class MessageReader {
  private buffer = new Uint8Array(0);

  push(data: Uint8Array): void {
    if (this.buffer.length === 0) {
      this.buffer = data.slice();
      return;
    }
    const merged = new Uint8Array(this.buffer.length + data.length);
    merged.set(this.buffer, 0);
    merged.set(data, this.buffer.length);
    this.buffer = merged;
  }

  /** Next complete message, or null until more bytes arrive. */
  next(): Message | null {
    if (this.buffer.length < 4) return null;
    const length = view(this.buffer).getUint32(0, true);
    if (length < 1) throw new ProtocolError("message length must cover the kind byte");
    if (length > MAX_MESSAGE_BYTES) {
      throw new ProtocolError(`message of ${length} bytes exceeds the limit`);
    }
    if (this.buffer.length < 4 + length) return null;
    const kind = this.buffer[4]!;
    const payload = this.buffer.slice(5, 4 + length);
    this.buffer = this.buffer.slice(4 + length);
    return { kind, payload };
  }

  /** Bytes sitting in the buffer that do not yet form a message. */
  get pendingBytes(): number {
    return this.buffer.length;
  }
}

function formatFloat(x: number): string {
  if (!Number.isFinite(x)) throw new ProtocolError(`non-finite component ${x}`);
  if (Object.is(x, -0)) return "-0";
  return String(x);
}

/** One event as a log row: timestamp,device,px,py,pz,qw,qx,qy,qz[,flag...]. */
export function formatEvent(event: WireEvent): string {
  const fields = [
    String(event.timestamp),
    event.device,
    ...event.position.map(formatFloat),
    ...event.orientation.map(formatFloat),
    ...BUTTON_FLAGS.filter((flag) => event.buttons.includes(flag)),
  ];
  return fields.join(",");
}

/** Serialize an emitted-event list in the engine's replayable log format. */
export function formatEventLog(events: readonly WireEvent[]): string {
  return events.map((e) => formatEvent(e) + "\n").join("");
}
