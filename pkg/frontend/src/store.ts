/** UI session state, rebuilt purely from telemetry messages.
 *
 * Two hard rules from the host's contract:
 *  - the displayed mode is always the last state the device acknowledged;
 *    sending a command never changes it optimistically, and
 *  - every number shown originates in a host message (the store only buffers
 *    and scales for display, it never recomputes DSP results).
 */

import type {
  AckMsg, BinsMsg, ClientMessage, CommandKind, CommandMsg, DeviceConfigView,
  DeviceMode, EnergyMsg, LinkMsg, ServerMessage,
} from "./protocol.js";

export type ConnectionState = "disconnected" | "connecting" | "connected";

export interface NackInfo {
  id?: number;
  kind?: CommandKind;
  reason: string;
  mode: DeviceMode;
}

export interface SpectroColumn {
  t_ms: number;
  power: number[];
}

const WAVEFORM_SECONDS = 5;        // rolling chart depth per channel
const SPECTRO_COLUMNS = 180;
const EVENT_LOG_DEPTH = 50;

export class SessionStore {
  connection: ConnectionState = "disconnected";
  mode: DeviceMode | null = null;
  config: DeviceConfigView | null = null;

  waveforms: number[][] = [];
  displayRate = 250;

  psd: { freqs: number[]; power: number[] } | null = null;
  spectroColumns: SpectroColumn[] = [];
  bins: BinsMsg | null = null;
  summary: number[] | null = null;
  link: LinkMsg | null = null;
  energy: EnergyMsg | null = null;
  lossTotal = 0;

  lastAck: AckMsg | null = null;
  lastNack: NackInfo | null = null;
  events: string[] = [];

  /** Wire this to the transport; sendCommand()/sendTap() call it. */
  onSend: ((msg: ClientMessage) => void) | null = null;

  private nextId = 1;
  private pending = new Map<number, CommandKind>();

  // -- inbound ---------------------------------------------------------------

  apply(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello":
        this.mode = msg.mode;
        this.config = msg.config;
        this.resetBuffers();
        this.note(`connected: device ${msg.mode}`);
        break;
      case "state":
        // state messages reflect the device's acknowledged mode
        this.mode = msg.mode;
        if (msg.ack === false && msg.reason) {
          this.lastNack = { reason: msg.reason, mode: msg.mode, id: msg.command_id };
          this.note(`refused: ${msg.reason}`);
        }
        break;
      case "ack": {
        this.lastAck = msg;
        this.mode = msg.mode;
        const kind = msg.id !== undefined ? this.pending.get(msg.id) : undefined;
        if (msg.id !== undefined) this.pending.delete(msg.id);
        if (!msg.ok) {
          this.lastNack = { id: msg.id, kind, reason: msg.reason, mode: msg.mode };
          this.note(`NACK ${kind ?? ""}: ${msg.reason}`);
        } else {
          this.note(`ack ${kind ?? ""} -> ${msg.mode}`);
        }
        break;
      }
      case "samples":
        this.displayRate = msg.fs;
        this.pushSamples(msg.rows);
        break;
      case "psd":
        this.psd = { freqs: msg.freqs, power: msg.power };
        this.spectroColumns.push({ t_ms: msg.t_ms, power: msg.power });
        if (this.spectroColumns.length > SPECTRO_COLUMNS) this.spectroColumns.shift();
        break;
      case "bins":
        this.bins = msg;
        break;
      case "summary":
        this.summary = msg.values;
        break;
      case "link":
        this.link = msg;
        break;
      case "energy":
        this.energy = msg;
        break;
      case "loss":
        this.lossTotal += msg.count;
        this.note(`link loss: ${msg.count} packet(s)`);
        break;
      case "error":
        this.note(`server error: ${msg.message}`);
        break;
    }
  }

  private pushSamples(rows: number[][]): void {
    if (rows.length === 0) return;
    const channels = rows[0].length;
    if (this.waveforms.length !== channels) {
      this.waveforms = Array.from({ length: channels }, () => []);
    }
    const cap = Math.max(1, Math.round(WAVEFORM_SECONDS * this.displayRate));
    for (const row of rows) {
      for (let c = 0; c < channels; c++) {
        const buf = this.waveforms[c];
        buf.push(row[c]);
        if (buf.length > cap) buf.splice(0, buf.length - cap);
      }
    }
  }

  private resetBuffers(): void {
    this.waveforms = [];
    this.psd = null;
    this.spectroColumns = [];
    this.bins = null;
    this.summary = null;
  }

  private note(text: string): void {
    this.events.push(text);
    if (this.events.length > EVENT_LOG_DEPTH) this.events.shift();
  }

  // -- outbound ---------------------------------------------------------------

  /** Device-guard mirror: which controls make sense in the current mode.
   * The device still arbitrates; this only drives control enablement. */
  allowed(kind: CommandKind | "TAP"): boolean {
    switch (this.mode) {
      case "CONNECTED_IDLE":
        return kind !== "STOP" && kind !== "TAP";
      case "STREAMING":
      case "EDGE_COMPUTE":
        return kind === "STOP";
      case "SLEEP":
        return kind === "TAP";
      default:
        return false;
    }
  }

  sendCommand(kind: CommandKind, opts: { mode?: DeviceMode; params?: Record<string, unknown> } = {}): number {
    const id = this.nextId++;
    const msg: CommandMsg = { type: "command", id, kind, ...opts };
    this.pending.set(id, kind);
    // No optimistic mode change: this.mode only moves on ack/state messages.
    this.onSend?.(msg);
    return id;
  }

  sendTap(): number {
    const id = this.nextId++;
    this.onSend?.({ type: "tap", id });
    return id;
  }

  // -- display helpers -----------------------------------------------------------

  /** Frequency whose displayed aggregate bar is tallest (what the operator
   * sees); by construction it must match the host's `classified` field. */
  binArgmax(): number | null {
    if (!this.bins || this.bins.agg.length === 0) return null;
    let best = 0;
    for (let i = 1; i < this.bins.agg.length; i++) {
      if (this.bins.agg[i] > this.bins.agg[best]) best = i;
    }
    return this.bins.freqs[best];
  }

  pendingCount(): number {
    return this.pending.size;
  }
}
