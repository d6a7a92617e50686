/** Integration against a live host running the flicker-classification
 * scenario: acknowledged mode switches, bin-bar/classification agreement,
 * and NACK surfacing without state divergence. */

import { spawn, type ChildProcess } from "node:child_process";
import path from "node:path";
import readline from "node:readline";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import type { AckMsg, BinsMsg } from "../src/protocol.js";
import { TelemetryClient } from "../src/client.js";
import { SessionStore } from "../src/store.js";

const repoRoot = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "..", "..");

let proc: ChildProcess;
let store: SessionStore;
let client: TelemetryClient;

async function startHost(): Promise<number> {
  proc = spawn("python3", [
    "-m", "wearsim.cli", "serve", "scenarios/ssvep-edge.scn",
    "--port", "0", "--speed", "25", "--ignore-script", "--out", "/tmp/dashboard-test",
  ], { cwd: repoRoot, stdio: ["ignore", "pipe", "pipe"] });
  const rl = readline.createInterface({ input: proc.stdout! });
  return new Promise<number>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("host did not start")), 30000);
    rl.on("line", (line) => {
      const m = /listening on 127\.0\.0\.1:(\d+)/.exec(line);
      if (m) {
        clearTimeout(timer);
        resolve(Number(m[1]));
      }
    });
    proc.on("exit", (code) => reject(new Error(`host exited early (${code})`)));
  });
}

beforeAll(async () => {
  const port = await startHost();
  store = new SessionStore();
  client = new TelemetryClient(store, { port });
  await client.connect();
  await client.waitFor((m) => m.type === "hello");
}, 60000);

afterAll(async () => {
  client?.close();
  proc?.kill();
  await new Promise((r) => setTimeout(r, 200));
});

describe("live dashboard session", () => {
  it("switches modes only through acknowledged state changes", async () => {
    expect(store.mode).toBe("CONNECTED_IDLE");
    const id = store.sendCommand("START", { mode: "EDGE_COMPUTE" });
    // mode must not move until the device acknowledges
    expect(store.mode).toBe("CONNECTED_IDLE");
    const ack = (await client.waitFor(
      (m) => m.type === "ack" && m.id === id)) as AckMsg;
    expect(ack.ok).toBe(true);
    expect(store.mode).toBe("EDGE_COMPUTE");
  }, 30000);

  it("shows bin bars whose argmax equals the host classification", async () => {
    const seen: BinsMsg[] = [];
    while (seen.length < 25) {
      const msg = (await client.waitFor((m) => m.type === "bins", 30000)) as BinsMsg;
      seen.push(msg);
      // the store renders exactly this message; its tallest bar must agree
      expect(store.binArgmax()).toBe(store.bins!.classified);
    }
    expect(new Set(seen.map((b) => b.freqs.length))).toEqual(new Set([4]));
  }, 60000);

  it("surfaces NACKs without diverging from device state", async () => {
    const id = store.sendCommand("SET_PARAMS", { params: { gain: 12 } });
    const ack = (await client.waitFor(
      (m) => m.type === "ack" && m.id === id)) as AckMsg;
    expect(ack.ok).toBe(false);
    expect(store.mode).toBe("EDGE_COMPUTE"); // unchanged
    expect(store.lastNack?.reason).toBeTruthy();
    expect(store.allowed("SET_PARAMS")).toBe(false); // control was disabled anyway
  }, 30000);

  it("stop, sleep, and double-tap wake round-trip", async () => {
    let id = store.sendCommand("STOP");
    await client.waitFor((m) => m.type === "ack" && m.id === id);
    expect(store.mode).toBe("CONNECTED_IDLE");

    id = store.sendCommand("SLEEP");
    await client.waitFor((m) => m.type === "ack" && m.id === id);
    expect(store.mode).toBe("SLEEP");

    // commands are refused while asleep
    id = store.sendCommand("START", { mode: "STREAMING" });
    const nack = (await client.waitFor(
      (m) => m.type === "ack" && m.id === id)) as AckMsg;
    expect(nack.ok).toBe(false);
    expect(store.mode).toBe("SLEEP");

    store.sendTap();
    await client.waitFor((m) => m.type === "state" && m.mode === "CONNECTED_IDLE");
    expect(store.mode).toBe("CONNECTED_IDLE");
  }, 30000);
});
