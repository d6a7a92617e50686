/** Browser entry: subscribe to the bridge's event stream, feed the session
 * store, render panels, and send operator commands. The displayed mode is
 * always the device's acknowledged state; controls disable whenever the
 * device would refuse them. */

import { drawBinBars, drawPsd, drawSpectrogram, drawWaveforms } from "./charts.js";
import { parseLine, type ClientMessage, type CommandKind } from "./protocol.js";
import { SessionStore } from "./store.js";

const store = new SessionStore();

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

async function post(msg: ClientMessage): Promise<void> {
  await fetch("/command", { method: "POST", body: JSON.stringify(msg) });
}
store.onSend = (msg) => { void post(msg); };

function connectEvents(): void {
  store.connection = "connecting";
  render();
  const es = new EventSource("/events");
  es.onopen = () => { store.connection = "connected"; render(); };
  es.onmessage = (ev) => {
    const msg = parseLine(ev.data);
    if (msg) {
      store.apply(msg);
      render();
    }
  };
  es.onerror = () => {
    store.connection = "disconnected";
    render();
    // EventSource retries on its own; just reflect status.
  };
}

const CONTROLS: Array<[string, CommandKind | "TAP", () => void]> = [
  ["btn-stream", "START", () => store.sendCommand("START", { mode: "STREAMING" })],
  ["btn-edge", "START", () => store.sendCommand("START", { mode: "EDGE_COMPUTE" })],
  ["btn-stop", "STOP", () => store.sendCommand("STOP")],
  ["btn-sleep", "SLEEP", () => store.sendCommand("SLEEP")],
  ["btn-tap", "TAP", () => store.sendTap()],
  ["btn-params", "SET_PARAMS", () => {
    const gain = Number((document.getElementById("sel-gain") as HTMLSelectElement).value);
    const rate = Number((document.getElementById("sel-rate") as HTMLSelectElement).value);
    const channels = Number((document.getElementById("sel-ch") as HTMLSelectElement).value);
    store.sendCommand("SET_PARAMS", {
      params: { gain, sample_rate: rate, eeg_channels: channels },
    });
  }],
];

function wireControls(): void {
  for (const [id, , handler] of CONTROLS) {
    $(id).addEventListener("click", handler);
  }
}

function render(): void {
  $("conn-badge").textContent = store.connection;
  $("conn-badge").className = `badge ${store.connection}`;
  $("mode-badge").textContent = store.mode ?? "–";
  $("mode-badge").className = `badge mode-${store.mode ?? "none"}`;

  const cfg = store.config;
  $("config-line").textContent = cfg
    ? `${cfg.eeg_channels} ch @ ${cfg.sample_rate} SPS, gain ${cfg.gain}, ` +
      `hop ${cfg.hop_ms} ms, payload ${cfg.payload_mode}`
    : "no configuration yet";

  for (const [id, kind] of CONTROLS) {
    ($(id) as HTMLButtonElement).disabled = !store.allowed(kind);
  }

  const nack = store.lastNack;
  const toast = $("nack-toast");
  if (nack) {
    toast.textContent = `refused: ${nack.reason}`;
    toast.classList.add("visible");
  } else {
    toast.classList.remove("visible");
  }

  if (store.link) {
    $("link-line").textContent =
      `emitted ${store.link.emitted} · delivered ${store.link.delivered} · ` +
      `dropped ${store.link.dropped} · ring ${store.link.occupancy}/15 · ` +
      `lost ${store.lossTotal}`;
  }
  if (store.energy) {
    $("energy-line").textContent =
      `${store.energy.average_mw.toFixed(2)} mW average · ` +
      `${(store.energy.total_uj / 1e6).toFixed(3)} J total`;
  }

  drawWaveforms($("wave") as HTMLCanvasElement, store.waveforms);
  if (store.psd) {
    drawPsd($("psd") as HTMLCanvasElement, store.psd.freqs, store.psd.power);
  }
  drawSpectrogram($("spectro") as HTMLCanvasElement, store.spectroColumns);
  if (store.bins) {
    drawBinBars($("bars") as HTMLCanvasElement, store.bins.freqs,
                store.bins.agg, store.bins.classified);
    $("classified-line").textContent =
      `host classification: ${store.bins.classified} Hz`;
  }
  $("event-log").textContent = store.events.slice(-12).join("\n");
}

wireControls();
connectEvents();
render();
