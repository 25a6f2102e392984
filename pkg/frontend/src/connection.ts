/**
 * TCP transport to the engine: one ordered request/response byte stream with
 * the version handshake up front.
 */

import * as net from "node:net";

import {
  MSG_HELLO,
  Message,
  MessageReader,
  PROTOCOL_VERSION,
  ProtocolError,
  decodeHello,
  encodeHello,
  encodeMessage,
} from "./protocol.js";

export class VersionMismatchError extends Error {
  constructor(
    readonly engineVersion: number,
    readonly clientVersion: number,
  ) {
    super(
      `protocol version mismatch: engine speaks v${engineVersion}, ` +
        `this client speaks v${clientVersion}`,
    );
  }
}

export interface ConnectOptions {
  host?: string;
  port: number;
  /** Protocol version to announce; tests use this to provoke a refusal. */
  version?: number;
  /** Extra connection attempts after the first (default 0). */
  retries?: number;
  /** Delay before the first retry, doubled per attempt. */
  backoffMs?: number;
  /** Called before each retry so the UI can surface the wait. */
  onRetry?: (attempt: number, error: Error) => void;
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

function openSocket(host: string, port: number): Promise<net.Socket> {
  return new Promise((resolve, reject) => {
    const sock = net.createConnection({ host, port, noDelay: true });
    sock.once("connect", () => {
      sock.removeAllListeners("error");
      resolve(sock);
    });
    sock.once("error", (err) => reject(err));
  });
}

export class EngineConnection {
  /** Version the engine announced during the handshake. */
  engineVersion = 0;

  private reader = new MessageReader();
  private inbox: Message[] = [];
  private waiters: Array<{
    resolve: (msg: Message | null) => void;
    reject: (err: Error) => void;
  }> = [];
  private closed = false;
  private failure: Error | null = null;

  private constructor(private sock: net.Socket) {
    sock.on("data", (data: Buffer) => this.onData(data));
    sock.on("error", (err: Error) => this.onFailure(err));
    sock.on("close", () => this.onClose());
  }

  /** Dial the engine, retrying with backoff, then run the HELLO handshake. */
  static async connect(options: ConnectOptions): Promise<EngineConnection> {
    const host = options.host ?? "127.0.0.1";
    const version = options.version ?? PROTOCOL_VERSION;
    const retries = options.retries ?? 0;
    let backoff = options.backoffMs ?? 100;

    let sock: net.Socket | null = null;
    for (let attempt = 0; ; attempt++) {
      try {
        sock = await openSocket(host, options.port);
        break;
      } catch (err) {
        if (attempt >= retries) throw err;
        options.onRetry?.(attempt + 1, err as Error);
        await sleep(backoff);
        backoff *= 2;
      }
    }

    const conn = new EngineConnection(sock);
    conn.send(MSG_HELLO, encodeHello(version));
    const reply = await conn.readMessage();
    if (reply === null) {
      conn.close();
      throw new ProtocolError("engine closed the connection during the handshake");
    }
    if (reply.kind !== MSG_HELLO) {
      conn.close();
      throw new ProtocolError(`expected HELLO reply, got kind ${reply.kind}`);
    }
    conn.engineVersion = decodeHello(reply.payload);
    if (conn.engineVersion !== version) {
      conn.close();
      throw new VersionMismatchError(conn.engineVersion, version);
    }
    return conn;
  }

  get connected(): boolean {
    return !this.closed;
  }

  send(kind: number, payload?: Uint8Array): void {
    if (this.closed) throw this.failure ?? new ProtocolError("connection is closed");
    this.sock.write(encodeMessage(kind, payload));
  }

  /** Next inbound message; null once the engine hangs up cleanly. */
  readMessage(): Promise<Message | null> {
    const queued = this.inbox.shift();
    if (queued !== undefined) return Promise.resolve(queued);
    if (this.failure) return Promise.reject(this.failure);
    if (this.closed) return Promise.resolve(null);
    return new Promise((resolve, reject) => this.waiters.push({ resolve, reject }));
  }

  close(): void {
    if (!this.closed) {
      this.closed = true;
      this.sock.destroy();
      this.drainWaiters(null);
    }
  }

  private onData(data: Buffer): void {
    try {
      this.reader.push(new Uint8Array(data.buffer, data.byteOffset, data.byteLength));
      for (let msg = this.reader.next(); msg !== null; msg = this.reader.next()) {
        const waiter = this.waiters.shift();
        if (waiter) waiter.resolve(msg);
        else this.inbox.push(msg);
      }
    } catch (err) {
      this.onFailure(err as Error);
    }
  }

  private onFailure(err: Error): void {
    if (this.closed) return;
    this.closed = true;
    this.failure = err;
    this.sock.destroy();
    for (const waiter of this.waiters.splice(0)) waiter.reject(err);
  }

  private onClose(): void {
    if (this.closed) return;
    this.closed = true;
    if (this.reader.pendingBytes > 0) {
      this.onFailureAfterClose(new ProtocolError("connection closed mid-message"));
      return;
    }
    this.drainWaiters(null);
  }

  private onFailureAfterClose(err: Error): void {
    this.failure = err;
    for (const waiter of this.waiters.splice(0)) waiter.reject(err);
  }

  private drainWaiters(value: Message | null): void {
    for (const waiter of this.waiters.splice(0)) waiter.resolve(value);
  }
}
