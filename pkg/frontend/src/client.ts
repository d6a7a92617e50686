/** Node-side telemetry client: line-JSON over TCP with reconnect/backoff.
 * Used by the bridge and the integration tests; the browser app consumes the
 * same stream relayed over SSE instead. */

import net from "node:net";

import { parseLine, type ClientMessage, type ServerMessage } from "./protocol.js";
import type { SessionStore } from "./store.js";

export interface ClientOptions {
  host?: string;
  port: number;
  reconnect?: boolean;
  backoffMs?: number;
  maxBackoffMs?: number;
}

type Waiter = {
  predicate: (msg: ServerMessage) => boolean;
  resolve: (msg: ServerMessage) => void;
};

export class TelemetryClient {
  private socket: net.Socket | null = null;
  private buffer = "";
  private waiters: Waiter[] = [];
  private stopped = false;
  private backoff: number;

  constructor(private store: SessionStore, private opts: ClientOptions) {
    this.backoff = opts.backoffMs ?? 250;
    store.onSend = (msg) => this.send(msg);
  }

  connect(): Promise<void> {
    this.store.connection = "connecting";
    return new Promise((resolve, reject) => {
      const sock = net.createConnection(
        { host: this.opts.host ?? "127.0.0.1", port: this.opts.port });
      sock.setNoDelay(true);
      sock.on("connect", () => {
        this.socket = sock;
        this.store.connection = "connected";
        this.backoff = this.opts.backoffMs ?? 250;
        resolve();
      });
      sock.on("data", (chunk) => this.onData(chunk.toString("utf8")));
      sock.on("error", () => { /* close follows */ });
      sock.on("close", () => {
        this.socket = null;
        const wasConnected = this.store.connection === "connected";
        this.store.connection = "disconnected";
        if (this.stopped) return;
        if (this.opts.reconnect) {
          const delay = this.backoff;
          this.backoff = Math.min(this.backoff * 2, this.opts.maxBackoffMs ?? 5000);
          setTimeout(() => { this.connect().catch(() => undefined); }, delay);
        }
        if (!wasConnected) reject(new Error("connection failed"));
      });
    });
  }

  close(): void {
    this.stopped = true;
    this.socket?.destroy();
    this.socket = null;
    this.store.connection = "disconnected";
  }

  send(msg: ClientMessage): void {
    this.socket?.write(JSON.stringify(msg) + "\n");
  }

  /** Resolve when a message matching the predicate arrives (test helper). */
  waitFor(predicate: (msg: ServerMessage) => boolean, timeoutMs = 15000): Promise<ServerMessage> {
    return new Promise((resolve, reject) => {
      const waiter: Waiter = { predicate, resolve };
      this.waiters.push(waiter);
      setTimeout(() => {
        const i = this.waiters.indexOf(waiter);
        if (i >= 0) {
          this.waiters.splice(i, 1);
          reject(new Error("timed out waiting for telemetry message"));
        }
      }, timeoutMs);
    });
  }

  private onData(text: string): void {
    this.buffer += text;
    let idx: number;
    while ((idx = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 1);
      if (!line.trim()) continue;
      const msg = parseLine(line);
      if (!msg) continue;
      this.store.apply(msg);
      for (let i = this.waiters.length - 1; i >= 0; i--) {
        if (this.waiters[i].predicate(msg)) {
          const [w] = this.waiters.splice(i, 1);
          w.resolve(msg);
        }
      }
    }
  }
}
