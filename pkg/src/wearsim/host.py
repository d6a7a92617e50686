"""Host-side controller: session logging, edge-result reassembly, trial
classification, and the streaming-vs-edge comparison table."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp, link
from .afe import exg_power
from .device import (ClusterCostModel, DeviceConfig, DeviceMode, PayloadMode,
                     fft_size_for_rate)
from .energy import PowerCalibration, battery_lifetime_h, energy_per_sample_uj
from .signals import AnalogTrace, SignalKind


@dataclass
class SampleBlock:
    t_ms: int
    seq: int
    volts: np.ndarray  # (frames, channels), input-referred


@dataclass
class PpgBlock:
    t_ms: int
    seq: int
    values: np.ndarray  # (frames, n_leds) reflectance


@dataclass
class BinRecord:
    t_ms: int
    report: dsp.SsvepBinReport


class SessionLog:
    """Everything the host saw during one run, in arrival order."""

    def __init__(self, metadata: dict | None = None):
        self.metadata = metadata or {}
        self.sample_blocks: list[SampleBlock] = []
        self.ppg_blocks: list[PpgBlock] = []
        self.bin_records: list[BinRecord] = []
        self.events: list[tuple] = []          # (t_ms, kind, detail)
        self.state_changes: list[tuple] = []   # (t_ms, mode name)
        self.loss_count = 0

    def log_event(self, t_ms: int, kind: str, detail: str = "") -> None:
        self.events.append((t_ms, kind, detail))

    def log_state(self, t_ms: int, mode: str) -> None:
        self.state_changes.append((t_ms, mode))
        self.log_event(t_ms, "state", mode)

    @property
    def eeg_sample_count(self) -> int:
        return sum(b.volts.shape[0] * b.volts.shape[1] for b in self.sample_blocks)

    def eeg_array(self) -> np.ndarray:
        if not self.sample_blocks:
            return np.zeros((0, 0))
        return np.vstack([b.volts for b in self.sample_blocks])

    def ppg_array(self) -> np.ndarray:
        if not self.ppg_blocks:
            return np.zeros((0, 0))
        return np.vstack([b.values for b in self.ppg_blocks])

    def channel_trace(self, channel: int, sample_rate: float) -> AnalogTrace:
        return AnalogTrace(self.eeg_array()[:, channel], sample_rate, SignalKind.EEG)

    # -- persistence ---------------------------------------------------------

    def save(self, directory) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "meta.json", "w") as fh:
            json.dump(self.metadata | {"loss_count": self.loss_count,
                                       "eeg_samples": self.eeg_sample_count}, fh, indent=2)
        eeg = self.eeg_array()
        with open(out / "samples.csv", "w") as fh:
            n_ch = eeg.shape[1] if eeg.size else 0
            fh.write("t_ms,seq," + ",".join(f"ch{c}" for c in range(n_ch)) + "\n")
            for block in self.sample_blocks:
                for i, row in enumerate(block.volts):
                    fh.write(f"{block.t_ms},{block.seq},"
                             + ",".join(repr(float(v)) for v in row) + "\n")
        if self.ppg_blocks:
            with open(out / "ppg.csv", "w") as fh:
                n_leds = self.ppg_blocks[0].values.shape[1]
                fh.write("t_ms,seq," + ",".join(f"led{c}" for c in range(n_leds)) + "\n")
                for block in self.ppg_blocks:
                    for row in block.values:
                        fh.write(f"{block.t_ms},{block.seq},"
                                 + ",".join(repr(float(v)) for v in row) + "\n")
        if self.bin_records:
            with open(out / "bins.csv", "w") as fh:
                freqs = self.bin_records[0].report.stim_freqs
                fh.write("t_ms," + ",".join(f"p{f:g}hz" for f in freqs) + "\n")
                for rec in self.bin_records:
                    pooled = rec.report.powers.sum(axis=0)
                    fh.write(f"{rec.t_ms}," + ",".join(repr(float(p)) for p in pooled) + "\n")
        with open(out / "events.csv", "w") as fh:
            fh.write("t_ms,kind,detail\n")
            for t_ms, kind, detail in self.events:
                fh.write(f"{t_ms},{kind},\"{detail}\"\n")

    def save_binary_traces(self, directory, sample_rate: float) -> list:
        """Per-channel raw traces in the standard binary trace format."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        eeg = self.eeg_array()
        paths = []
        for ch in range(eeg.shape[1] if eeg.size else 0):
            p = out / f"ch{ch}.bgtr"
            AnalogTrace(eeg[:, ch], sample_rate, SignalKind.EEG).to_binary(p)
            paths.append(p)
        return paths


class EdgeReassembler:
    """Glue split edge-result packets back into one report per hop."""

    def __init__(self, config: DeviceConfig):
        self.config = config
        self._parts: list[link.Packet] = []

    @property
    def expected_bytes(self) -> int:
        return self.config.eeg_channels * self.config.values_per_channel * 4

    def add(self, packet: link.Packet):
        """Returns a completed SsvepBinReport or None while fragments pend.
        A fresh timestamp discards any stale partial hop (fragment lost)."""
        if self._parts and self._parts[0].timestamp_ms != packet.timestamp_ms:
            self._parts = []
        self._parts.append(packet)
        have = sum(len(p.payload) for p in self._parts)
        if have < self.expected_bytes:
            return None
        values = link.unframe_edge(self._parts)
        self._parts = []
        cfg = self.config
        if cfg.payload_mode is PayloadMode.SUMMARY_1FP:
            return values.reshape(cfg.eeg_channels)
        harm = values.reshape(cfg.eeg_channels, len(cfg.stim_freqs), dsp.N_HARMONICS)
        return dsp.SsvepBinReport.from_harmonics(cfg.stim_freqs, harm)


@dataclass
class TrialResult:
    index: int
    t_start: float
    t_end: float
    label: float
    predicted: float | None
    hops: int

    @property
    def correct(self) -> bool:
        return self.predicted == self.label


def classify_trials(bin_records: list[BinRecord], trial_windows, window_s: float) -> list[TrialResult]:
    """Pool every report whose analysis window lies fully inside a trial, sum
    the per-frequency powers, and take the argmax per trial."""
    results = []
    for idx, (t0, t1, label) in enumerate(trial_windows):
        pooled = None
        freqs = None
        hops = 0
        for rec in bin_records:
            t_end = rec.t_ms / 1000.0
            t_start = t_end - window_s
            if t_start >= t0 and t_end <= t1:
                hops += 1
                freqs = rec.report.stim_freqs
                p = rec.report.powers.sum(axis=0, dtype=np.float64)
                pooled = p if pooled is None else pooled + p
        predicted = None
        if pooled is not None:
            report = dsp.SsvepBinReport(stim_freqs=freqs,
                                        powers=pooled.reshape(1, -1),
                                        summary=np.array([pooled.max()], dtype=np.float32))
            predicted = dsp.classify_ssvep(report)
        results.append(TrialResult(idx, t0, t1, label, predicted, hops))
    return results


# ---------------------------------------------------------------------------
# Streaming vs edge comparison
# ---------------------------------------------------------------------------

@dataclass
class ModeRow:
    mode: str
    sample_rate: int
    offered_bps: float
    delivered_bps: float
    drop_fraction: float
    feasible: bool
    total_mw: float
    uj_per_sample: float


def _streaming_power_mw(cfg: DeviceConfig, cal: PowerCalibration, cap_bps: float,
                        offered: float) -> float:
    analog = exg_power(cfg.exg_config())
    duty = min(1.0, offered / cap_bps)
    led = cfg.ppg.supply_power_mw if cfg.ppg else 0.0
    return analog + cal.digital_streaming + cal.imu_mw + led + cal.radio_tx_mw * duty


def _edge_power_mw(cfg: DeviceConfig, cal: PowerCalibration, cost: ClusterCostModel,
                   cap_bps: float, offered: float) -> float:
    analog = exg_power(cfg.exg_config())
    n = fft_size_for_rate(cfg.sample_rate)
    hop_s = cfg.hop_ms / 1000.0
    cluster_avg = cal.cluster_active_mw * cost.batch_time_s(n, cfg.eeg_channels) / hop_s
    duty = min(1.0, offered / cap_bps)
    led = cfg.ppg.supply_power_mw if cfg.ppg else 0.0
    return (analog + cal.digital_edge + cal.imu_mw + led
            + cal.radio_tx_mw * duty + cluster_avg)


def compare_modes(sample_rates=(250, 500, 1000, 2000, 4000), channels: int = 8,
                  calibration: PowerCalibration | None = None,
                  cost: ClusterCostModel | None = None,
                  cap_bps: float = link.DEFAULT_THROUGHPUT_BPS,
                  hop_ms: int = 50) -> list[ModeRow]:
    """Offered/delivered bandwidth, feasibility, power, and per-sample energy
    for raw streaming vs on-device processing across sampling rates.

    The per-sample figure for the edge rows is the task energy (system total
    minus the fixed idle-overhead calibration entry)."""
    cal = calibration or PowerCalibration()
    cost = cost or ClusterCostModel()
    rows = []
    for fs in sample_rates:
        cfg = DeviceConfig(eeg_channels=channels, sample_rate=fs, hop_ms=hop_ms)
        offered = link.required_throughput(channels, fs)
        delivered = min(offered, cap_bps)
        feasible = offered <= cap_bps
        total = _streaming_power_mw(cfg, cal, cap_bps, offered)
        uj = energy_per_sample_uj(total, fs, channels) if channels else 0.0
        rows.append(ModeRow("STREAMING", fs, offered, delivered,
                            0.0 if feasible else 1.0 - cap_bps / offered,
                            feasible, total, uj))
    for fs in sample_rates:
        cfg = DeviceConfig(eeg_channels=channels, sample_rate=fs, hop_ms=hop_ms)
        offered = link.required_throughput(channels, fs, edge=True, hop_ms=hop_ms,
                                           values_per_channel=cfg.values_per_channel)
        total = _edge_power_mw(cfg, cal, cost, cap_bps, offered)
        task_mw = max(total - cal.edge_overhead_mw, 0.0)
        uj = energy_per_sample_uj(task_mw, fs, channels) if channels else 0.0
        rows.append(ModeRow("EDGE_COMPUTE", fs, offered, min(offered, cap_bps),
                            0.0, True, total, uj))
    return rows


def mode_table_text(rows: list[ModeRow]) -> str:
    header = (f"{'mode':<14}{'rate':>7}{'offered bps':>13}{'delivered':>11}"
              f"{'drops':>8}{'total mW':>10}{'uJ/sample':>11}  feasible")
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(f"{r.mode:<14}{r.sample_rate:>7}{r.offered_bps:>13.0f}"
                     f"{r.delivered_bps:>11.0f}{r.drop_fraction:>8.1%}"
                     f"{r.total_mw:>10.2f}{r.uj_per_sample:>11.3f}  "
                     f"{'yes' if r.feasible else 'NO (over link cap)'}")
    return "\n".join(lines)


def mode_table_csv(rows: list[ModeRow], path) -> None:
    with open(path, "w") as fh:
        fh.write("mode,sample_rate,offered_bps,delivered_bps,drop_fraction,"
                 "feasible,total_mw,uj_per_sample\n")
        for r in rows:
            fh.write(f"{r.mode},{r.sample_rate},{r.offered_bps},{r.delivered_bps},"
                     f"{r.drop_fraction},{int(r.feasible)},{r.total_mw},{r.uj_per_sample}\n")


def power_report_text(ledger_snapshot: dict, sample_rate: float, channels: int,
                      capacity_mah: float = 75.0, v_nom: float = 3.7) -> str:
    total_mw = ledger_snapshot["average_mw"]
    lines = [f"elapsed: {ledger_snapshot['elapsed_s']:.3f} s",
             f"total energy: {ledger_snapshot['total_uj']:.1f} uJ",
             f"average power: {total_mw:.3f} mW"]
    for name, uj in ledger_snapshot["domains_uj"].items():
        lines.append(f"  {name}: {uj:.1f} uJ")
    if total_mw > 0:
        lines.append(f"battery life at this draw: {battery_lifetime_h(total_mw, capacity_mah, v_nom):.1f} h")
    if channels and sample_rate:
        lines.append(f"energy per sample: {energy_per_sample_uj(total_mw, sample_rate, channels):.3f} uJ")
    return "\n".join(lines)
