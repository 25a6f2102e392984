/**
 * One live sculpting session against the engine. The engine owns all scene
 * state; this side only captures input, ships events in input order, shows
 * the frames and hover feedback it gets back, and keeps a transient grab
 * preview that the next authoritative snapshot overwrites. Every event that
 * changed engine state is kept in an emitted log, so the whole session can
 * be replayed headlessly to the identical scene.
 */

import { ConnectOptions, EngineConnection } from "./connection.js";
import { FrameStore } from "./frames.js";
import { PointerInput, PointerMapping } from "./pointer.js";
import {
  Ack,
  FramePacket,
  Hover,
  MSG_ACK,
  MSG_EVENT,
  MSG_FRAME,
  MSG_HOVER,
  MSG_SCENE_SNAPSHOT,
  ProtocolError,
  WireEvent,
  decodeAck,
  decodeFrame,
  decodeHover,
  encodeEvent,
  formatEventLog,
} from "./protocol.js";
import { SceneSummary, parseSceneSummary } from "./scene.js";
import { OverlayDrawList, renderOverlay } from "./overlay.js";

export type UiMode = "place" | "grab" | "sculpt" | "inspect";

export interface SessionOptions extends ConnectOptions {
  /** Events held while disconnected before the oldest is dropped. */
  eventQueueCap?: number;
  /** User-visible warnings: queue overflow, rejected events. */
  onWarning?: (message: string) => void;
}

interface GrabPreview {
  lensId: number;
  device: WireEvent["device"];
  /** Lens origin minus controller position at grab time. */
  offset: [number, number, number];
}

const DEFAULT_QUEUE_CAP = 256;

export class WorkbenchSession {
  readonly frames = new FrameStore();
  readonly pointer = new PointerMapping();
  uiMode: UiMode = "place";
  selectedLensId: number | null = null;
  hover: Hover | null = null;
  lastAck: Ack = { seq: 0, stateVersion: 0 };
  /** Latest authoritative scene document and its parsed summary. */
  sceneDoc = "";
  scene: SceneSummary | null = null;

  /** Transient grab preview; cleared by release or any scene refresh. */
  private preview: GrabPreview | null = null;
  private previewPosition: [number, number, number] | null = null;

  private emitted: WireEvent[] = [];
  private pendingOffline: WireEvent[] = [];
  private chain: Promise<unknown> = Promise.resolve();
  private readonly queueCap: number;
  private readonly warn: (message: string) => void;

  private constructor(
    private conn: EngineConnection,
    private readonly options: SessionOptions,
  ) {
    this.queueCap = options.eventQueueCap ?? DEFAULT_QUEUE_CAP;
    this.warn = options.onWarning ?? (() => {});
  }

  /** Handshake, pull the scene summary, and request the first frame. */
  static async connect(options: SessionOptions): Promise<WorkbenchSession> {
    const conn = await EngineConnection.connect(options);
    const session = new WorkbenchSession(conn, options);
    await session.refreshScene();
    await session.requestFrame();
    return session;
  }

  get connected(): boolean {
    return this.conn.connected;
  }

  /** Events acknowledged by the engine as state changes, in input order. */
  get emittedEvents(): readonly WireEvent[] {
    return this.emitted;
  }

  /** The session as a replayable event log. */
  eventLog(): string {
    return formatEventLog(this.emitted);
  }

  /**
   * Ship one controller event. Resolves with the engine's ack, or null when
   * the connection is down and the event was queued for the next reconnect.
   */
  emitEvent(event: WireEvent): Promise<Ack | null> {
    return this.enqueue(async () => {
      if (!this.conn.connected) {
        this.queueOffline(event);
        return null;
      }
      return this.shipEvent(event);
    });
  }

  /** Map a pointer sample through the controller surrogate and ship it. */
  emitPointer(input: PointerInput): Promise<Ack | null> {
    return this.emitEvent(this.pointer.toEvent(input));
  }

  /** Request a render; returns the packet and whether it went on screen. */
  requestFrame(): Promise<{ frame: FramePacket; displayed: boolean }> {
    return this.enqueue(async () => {
      this.conn.send(MSG_FRAME);
      const frame = decodeFrame(await this.expect(MSG_FRAME));
      const displayed = this.frames.offer(frame);
      return { frame, displayed };
    });
  }

  /** Pull the authoritative scene, dropping any transient preview. */
  refreshScene(): Promise<SceneSummary> {
    return this.enqueue(async () => {
      this.conn.send(MSG_SCENE_SNAPSHOT);
      const payload = await this.expect(MSG_SCENE_SNAPSHOT);
      this.sceneDoc = new TextDecoder().decode(payload);
      this.scene = parseSceneSummary(this.sceneDoc);
      this.preview = null;
      this.previewPosition = null;
      return this.scene;
    });
  }

  /** Current affordances over the latest frame, preview applied. */
  overlay(): OverlayDrawList {
    if (this.scene === null) return { handles: [], lockBadges: [], toggles: [] };
    let scene = this.scene;
    if (this.preview !== null && this.previewPosition !== null) {
      const { lensId } = this.preview;
      const position = this.previewPosition;
      scene = {
        ...scene,
        lenses: scene.lenses.map((lens) =>
          lens.id === lensId ? { ...lens, position } : lens,
        ),
      };
    }
    return renderOverlay(scene, this.hover);
  }

  /** Re-dial the engine and flush events queued while offline, in order. */
  async reconnect(): Promise<void> {
    this.conn = await EngineConnection.connect(this.options);
    const backlog = this.pendingOffline.splice(0);
    for (const event of backlog) {
      await this.enqueue(() => this.shipEvent(event));
    }
    await this.refreshScene();
  }

  close(): void {
    this.conn.close();
  }

  private enqueue<T>(op: () => Promise<T>): Promise<T> {
    const result = this.chain.then(op, op);
    this.chain = result.catch(() => {});
    return result;
  }

  private async expect(kind: number): Promise<Uint8Array> {
    const msg = await this.conn.readMessage();
    if (msg === null) throw new ProtocolError("engine closed the connection");
    if (msg.kind !== kind) {
      throw new ProtocolError(`expected message kind ${kind}, got ${msg.kind}`);
    }
    return msg.payload;
  }

  private async shipEvent(event: WireEvent): Promise<Ack> {
    const before = this.lastAck.stateVersion;
    this.conn.send(MSG_EVENT, encodeEvent(event));
    const ack = decodeAck(await this.expect(MSG_ACK));
    this.hover = decodeHover(await this.expect(MSG_HOVER));
    this.lastAck = ack;
    if (ack.stateVersion > before) {
      this.emitted.push(event);
      this.trackPreview(event);
    } else {
      // Rejected events are engine no-ops; keeping them out of the log keeps
      // it replayable end to end.
      this.warn(`engine rejected event seq ${ack.seq}`);
    }
    return ack;
  }

  private trackPreview(event: WireEvent): void {
    const released = event.buttons.includes("trigger_released");
    const pressed = event.buttons.includes("trigger_pressed");
    if (released) {
      this.preview = null;
      this.previewPosition = null;
      return;
    }
    if (pressed) {
      // Preview only what the engine already reported under the cursor; the
      // grab decision itself stays core-side.
      const hovered = this.hover;
      const lens = hovered && this.scene?.lenses.find((l) => l.id === hovered.lensId);
      if (hovered && lens && hovered.kind === "origin" && !lens.locked) {
        this.preview = {
          lensId: lens.id,
          device: event.device,
          offset: [
            lens.position[0] - event.position[0],
            lens.position[1] - event.position[1],
            lens.position[2] - event.position[2],
          ],
        };
        this.previewPosition = [...lens.position];
        this.selectedLensId = lens.id;
      }
      return;
    }
    if (this.preview !== null && event.device === this.preview.device) {
      const [ox, oy, oz] = this.preview.offset;
      this.previewPosition = [
        event.position[0] + ox,
        event.position[1] + oy,
        event.position[2] + oz,
      ];
    }
  }

  private queueOffline(event: WireEvent): void {
    if (this.pendingOffline.length >= this.queueCap) {
      this.pendingOffline.shift();
      this.warn("offline event queue full, dropping the oldest event");
    }
    this.pendingOffline.push(event);
  }
}
