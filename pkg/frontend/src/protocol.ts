/** Telemetry message schema: line-delimited JSON over TCP (or relayed over
 * SSE by the bridge). Mirrors the host's documented protocol verbatim. */

export type DeviceMode =
  | "BOOT"
  | "CONNECTED_IDLE"
  | "STREAMING"
  | "EDGE_COMPUTE"
  | "SLEEP";

export type CommandKind = "START" | "STOP" | "SET_MODE" | "SET_PARAMS" | "SLEEP";

export interface DeviceConfigView {
  eeg_channels: number;
  sample_rate: number;
  gain: number;
  hop_ms: number;
  payload_mode: "summary" | "bins";
  stim_freqs: number[];
  ppg: boolean;
}

export interface HelloMsg {
  type: "hello";
  t_ms: number;
  mode: DeviceMode;
  config: DeviceConfigView;
}

export interface StateMsg {
  type: "state";
  t_ms: number;
  mode: DeviceMode;
  ack?: boolean;
  reason?: string;
  command_id?: number;
}

export interface AckMsg {
  type: "ack";
  id?: number;
  ok: boolean;
  mode: DeviceMode;
  reason: string;
}

export interface SamplesMsg {
  type: "samples";
  t_ms: number;
  fs: number;
  rows: number[][];
}

export interface PsdMsg {
  type: "psd";
  t_ms: number;
  freqs: number[];
  power: number[];
}

export interface BinsMsg {
  type: "bins";
  t_ms: number;
  freqs: number[];
  powers: number[];
  agg: number[];
  classified: number;
}

export interface SummaryMsg {
  type: "summary";
  t_ms: number;
  values: number[];
}

export interface LinkMsg {
  type: "link";
  t_ms: number;
  emitted: number;
  delivered: number;
  dropped: number;
  occupancy: number;
}

export interface EnergyMsg {
  type: "energy";
  t_ms: number;
  average_mw: number;
  total_uj: number;
  domains_uj: Record<string, number>;
}

export interface LossMsg {
  type: "loss";
  t_ms: number;
  count: number;
}

export interface ErrorMsg {
  type: "error";
  message: string;
  id?: number;
}

export type ServerMessage =
  | HelloMsg
  | StateMsg
  | AckMsg
  | SamplesMsg
  | PsdMsg
  | BinsMsg
  | SummaryMsg
  | LinkMsg
  | EnergyMsg
  | LossMsg
  | ErrorMsg;

export interface CommandMsg {
  type: "command";
  id: number;
  kind: CommandKind;
  mode?: DeviceMode;
  params?: Record<string, unknown>;
}

export interface TapMsg {
  type: "tap";
  id?: number;
}

export type ClientMessage = CommandMsg | TapMsg | { type: "hello" };

const KNOWN_TYPES = new Set([
  "hello", "state", "ack", "samples", "psd", "bins", "summary",
  "link", "energy", "loss", "error",
]);

/** Parse one telemetry line; returns null for anything unusable. */
export function parseLine(line: string): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const type = (obj as { type?: unknown }).type;
  if (typeof type !== "string" || !KNOWN_TYPES.has(type)) return null;
  return obj as ServerMessage;
}
