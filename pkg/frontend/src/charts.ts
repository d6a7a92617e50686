/** Plain-canvas renderers; nothing here computes signal values, it only
 * scales host-provided numbers into pixels. */

import type { SpectroColumn } from "./store.js";

const GRID = "#2a3142";
const TRACE_COLORS = ["#6cc2ff", "#7dff9a", "#ffd166", "#ff6c8f",
  "#c49bff", "#63e6e2", "#ffa94d", "#e599f7"];

function clear(ctx: CanvasRenderingContext2D): void {
  ctx.fillStyle = "#131722";
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

export function drawWaveforms(canvas: HTMLCanvasElement, channels: number[][]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  clear(ctx);
  const n = channels.length;
  if (n === 0) return;
  const laneH = canvas.height / n;
  channels.forEach((buf, c) => {
    if (buf.length < 2) return;
    let lo = Infinity, hi = -Infinity;
    for (const v of buf) { if (v < lo) lo = v; if (v > hi) hi = v; }
    const span = hi - lo || 1;
    ctx.strokeStyle = GRID;
    ctx.strokeRect(0, c * laneH, canvas.width, laneH);
    ctx.strokeStyle = TRACE_COLORS[c % TRACE_COLORS.length];
    ctx.beginPath();
    for (let i = 0; i < buf.length; i++) {
      const x = (i / (buf.length - 1)) * canvas.width;
      const y = c * laneH + laneH - ((buf[i] - lo) / span) * (laneH * 0.9) - laneH * 0.05;
      i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    }
    ctx.stroke();
  });
}

export function drawPsd(canvas: HTMLCanvasElement,
                        freqs: number[], power: number[], fMax = 60): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  clear(ctx);
  const pts: Array<[number, number]> = [];
  for (let i = 0; i < freqs.length; i++) {
    if (freqs[i] <= fMax && power[i] > 0) pts.push([freqs[i], Math.log10(power[i])]);
  }
  if (pts.length < 2) return;
  let lo = Infinity, hi = -Infinity;
  for (const [, p] of pts) { if (p < lo) lo = p; if (p > hi) hi = p; }
  const span = hi - lo || 1;
  ctx.strokeStyle = TRACE_COLORS[0];
  ctx.beginPath();
  pts.forEach(([f, p], i) => {
    const x = (f / fMax) * canvas.width;
    const y = canvas.height - ((p - lo) / span) * canvas.height * 0.92 - 4;
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();
  ctx.fillStyle = "#8892a8";
  ctx.font = "10px monospace";
  for (const f of [10, 20, 30, 40, 50]) {
    const x = (f / fMax) * canvas.width;
    ctx.fillText(`${f}`, x - 6, canvas.height - 2);
  }
}

export function drawSpectrogram(canvas: HTMLCanvasElement, columns: SpectroColumn[],
                                binMax = 64): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  clear(ctx);
  if (columns.length === 0) return;
  let hi = -Infinity, lo = Infinity;
  for (const col of columns) {
    for (let k = 1; k < Math.min(col.power.length, binMax); k++) {
      const p = col.power[k];
      if (p <= 0) continue;
      const d = Math.log10(p);
      if (d > hi) hi = d;
      if (d < lo) lo = d;
    }
  }
  const span = hi - lo || 1;
  const cw = canvas.width / columns.length;
  const ch = canvas.height / binMax;
  columns.forEach((col, i) => {
    for (let k = 0; k < Math.min(col.power.length, binMax); k++) {
      const p = col.power[k];
      const t = p > 0 ? (Math.log10(p) - lo) / span : 0;
      const heat = Math.max(0, Math.min(1, t));
      ctx.fillStyle = `rgb(${Math.round(40 + 215 * heat)},${Math.round(30 + 120 * heat)},${Math.round(90 - 40 * heat)})`;
      ctx.fillRect(i * cw, canvas.height - (k + 1) * ch, Math.ceil(cw), Math.ceil(ch));
    }
  });
}

export function drawBinBars(canvas: HTMLCanvasElement, freqs: number[],
                            values: number[], classified: number | null): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  clear(ctx);
  if (freqs.length === 0) return;
  const max = Math.max(...values, 1e-30);
  const barW = canvas.width / freqs.length;
  freqs.forEach((f, i) => {
    const h = (values[i] / max) * (canvas.height - 24);
    const best = classified !== null && f === classified;
    ctx.fillStyle = best ? "#7dff9a" : "#4a6fa5";
    ctx.fillRect(i * barW + barW * 0.15, canvas.height - 16 - h, barW * 0.7, h);
    ctx.fillStyle = "#c3cbdc";
    ctx.font = "11px monospace";
    ctx.fillText(`${f}`, i * barW + barW * 0.2, canvas.height - 4);
  });
}
