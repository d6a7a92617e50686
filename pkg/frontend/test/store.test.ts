/** SessionStore unit tests: acknowledged-state discipline, control guards,
 * display buffering, and telemetry-only reconstruction. */

import { describe, expect, it } from "vitest";

import { parseLine, type BinsMsg, type HelloMsg, type ServerMessage } from "../src/protocol.js";
import { SessionStore } from "../src/store.js";

const hello: HelloMsg = {
  type: "hello",
  t_ms: 0,
  mode: "CONNECTED_IDLE",
  config: {
    eeg_channels: 8, sample_rate: 1000, gain: 6, hop_ms: 50,
    payload_mode: "bins", stim_freqs: [1, 3.125, 7.8125, 10.6125], ppg: false,
  },
};

function freshStore(): SessionStore {
  const store = new SessionStore();
  store.apply(hello);
  return store;
}

describe("acknowledged-state discipline", () => {
  it("shows the mode from hello", () => {
    const store = freshStore();
    expect(store.mode).toBe("CONNECTED_IDLE");
    expect(store.config?.eeg_channels).toBe(8);
  });

  it("never changes mode optimistically on send", () => {
    const store = freshStore();
    const sent: unknown[] = [];
    store.onSend = (m) => sent.push(m);
    store.sendCommand("START", { mode: "STREAMING" });
    expect(store.mode).toBe("CONNECTED_IDLE");
    expect(sent).toHaveLength(1);
    expect(store.pendingCount()).toBe(1);
  });

  it("moves mode on a positive ack and clears pending", () => {
    const store = freshStore();
    store.onSend = () => undefined;
    const id = store.sendCommand("START", { mode: "STREAMING" });
    store.apply({ type: "ack", id, ok: true, mode: "STREAMING", reason: "" });
    expect(store.mode).toBe("STREAMING");
    expect(store.pendingCount()).toBe(0);
    expect(store.lastNack).toBeNull();
  });

  it("surfaces a NACK without any state divergence", () => {
    const store = freshStore();
    store.onSend = () => undefined;
    store.apply({ type: "ack", id: 5, ok: true, mode: "STREAMING", reason: "" });
    const id = store.sendCommand("SET_PARAMS", { params: { gain: 12 } });
    store.apply({
      type: "ack", id, ok: false, mode: "STREAMING",
      reason: "parameters can only change while idle",
    });
    expect(store.mode).toBe("STREAMING");
    expect(store.lastNack?.reason).toContain("idle");
    expect(store.lastNack?.kind).toBe("SET_PARAMS");
  });
});

describe("control guards mirror the device", () => {
  it("idle allows start/params/sleep but not stop", () => {
    const store = freshStore();
    expect(store.allowed("START")).toBe(true);
    expect(store.allowed("SET_PARAMS")).toBe(true);
    expect(store.allowed("SLEEP")).toBe(true);
    expect(store.allowed("STOP")).toBe(false);
  });

  it("measuring allows only stop; sleep allows only the tap", () => {
    const store = freshStore();
    store.apply({ type: "state", t_ms: 1, mode: "EDGE_COMPUTE" });
    expect(store.allowed("STOP")).toBe(true);
    expect(store.allowed("START")).toBe(false);
    store.apply({ type: "state", t_ms: 2, mode: "SLEEP" });
    expect(store.allowed("TAP")).toBe(true);
    expect(store.allowed("STOP")).toBe(false);
  });
});

describe("display buffers", () => {
  it("caps rolling waveforms at five seconds per channel", () => {
    const store = freshStore();
    store.apply({ type: "samples", t_ms: 0, fs: 100, rows: [[0, 1]] });
    for (let i = 0; i < 700; i++) {
      store.apply({ type: "samples", t_ms: i, fs: 100, rows: [[i, -i]] });
    }
    expect(store.waveforms).toHaveLength(2);
    expect(store.waveforms[0].length).toBe(500);
    // newest samples survive
    expect(store.waveforms[0][499]).toBe(699);
  });

  it("tallest displayed bin bar equals the host classification", () => {
    const store = freshStore();
    const bins: BinsMsg = {
      type: "bins", t_ms: 5, freqs: [1, 3.125, 7.8125, 10.6125],
      powers: [1, 2, 10, 3], agg: [4, 9, 80, 11], classified: 7.8125,
    };
    store.apply(bins);
    expect(store.binArgmax()).toBe(bins.classified);
  });

  it("accumulates loss counts and event notes", () => {
    const store = freshStore();
    store.apply({ type: "loss", t_ms: 1, count: 3 });
    store.apply({ type: "loss", t_ms: 2, count: 2 });
    expect(store.lossTotal).toBe(5);
    expect(store.events.some((e) => e.includes("loss"))).toBe(true);
  });
});

describe("telemetry-only reconstruction", () => {
  it("two stores fed the same messages render the same view", () => {
    const stream: ServerMessage[] = [
      hello,
      { type: "state", t_ms: 1, mode: "STREAMING" },
      { type: "samples", t_ms: 2, fs: 250, rows: [[1, 2, 3, 4, 5, 6, 7, 8]] },
      { type: "link", t_ms: 3, emitted: 10, delivered: 9, dropped: 1, occupancy: 0 },
      {
        type: "energy", t_ms: 3, average_mw: 28.8, total_uj: 100,
        domains_uj: { radio: 10 },
      },
    ];
    const a = new SessionStore();
    const b = new SessionStore();
    for (const m of stream) { a.apply(m); b.apply(m); }
    expect(b.mode).toBe(a.mode);
    expect(b.waveforms).toEqual(a.waveforms);
    expect(b.link).toEqual(a.link);
    expect(b.energy).toEqual(a.energy);
  });
});

describe("protocol parsing", () => {
  it("rejects garbage and unknown types", () => {
    expect(parseLine("not json")).toBeNull();
    expect(parseLine("42")).toBeNull();
    expect(parseLine('{"type":"martian"}')).toBeNull();
    expect(parseLine('{"type":"state","t_ms":1,"mode":"SLEEP"}')).not.toBeNull();
  });
});
