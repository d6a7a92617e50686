"""Declarative scenario files and the simulation runner that executes them.

A scenario wires together a synthetic signal source, a device configuration,
a link model, a timed command script, and a list of output reports, so every
system-level claim is a checked-in, re-runnable script.

Format (sections of key = value lines; '#' starts a comment):

    [scenario]
    name = alpha-wave
    seed = 7
    duration_s = 63

    [device]
    eeg_channels = 8
    sample_rate = 1000
    gain = 6
    payload = summary          # summary | bins
    hop_ms = 50
    ppg = off                  # off | 10 | 100 (sample rate, RED+IR)

    [source]
    type = alpha               # alpha | ssvep | ppg | silence
    segments = closed:30, open:30

    [link]
    throughput_bps = 330000
    outages = 10.0:10.5, 40:41 # seconds
    latency_us = 2500

    [commands]
    at 0.5 start streaming     # verbs: start streaming|edge, stop, sleep,
    at 61.0 stop               #        set_mode <mode>, set_params k=v ...

    [imu]
    tap = 65.0, 70.0           # double-tap wake events, seconds

    [reports]
    psd = alpha_psd.csv
    spectrogram = alpha_spec.csv
    power = power.txt
    bandwidth = bandwidth.txt
    classification = trials.csv
    log_dir = session_log
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp, link as link_mod
from .device import (ClusterCostModel, CommandKind, Device, DeviceConfig,
                     DeviceMode, HostCommand, PayloadMode)
from .energy import EnergyLedger, PowerCalibration, PowerDomain
from .host import (BinRecord, EdgeReassembler, PpgBlock, SampleBlock,
                   SessionLog, TrialResult, classify_trials, power_report_text)
from .afe import PpgConfig
from .sim import Priority, Scheduler
from .signals import (AnalogTrace, EyeState, SignalKind, SsvepStimulus,
                      gen_alpha_eeg, gen_background, gen_ppg, gen_ssvep_session)


class ScenarioError(Exception):
    pass


@dataclass
class Scenario:
    name: str = "unnamed"
    seed: int = 0
    duration_s: float = 10.0
    device_kwargs: dict = field(default_factory=dict)
    source_spec: dict = field(default_factory=lambda: {"type": "silence"})
    link_kwargs: dict = field(default_factory=dict)
    commands: list = field(default_factory=list)   # (t_s, HostCommand)
    taps: list = field(default_factory=list)       # t_s
    reports: dict = field(default_factory=dict)

    def device_config(self) -> DeviceConfig:
        return DeviceConfig(**self.device_kwargs)


_MODE_WORDS = {"streaming": DeviceMode.STREAMING, "edge": DeviceMode.EDGE_COMPUTE}


def _parse_params(tokens: list, where: str) -> dict:
    params = {}
    for tok in tokens:
        if "=" not in tok:
            raise ScenarioError(f"{where}: expected key=value, got {tok!r}")
        key, value = tok.split("=", 1)
        params[key] = _device_value(key, value, where)
    return params


def _device_value(key: str, value: str, where: str):
    if key == "payload":
        if value not in ("summary", "bins"):
            raise ScenarioError(f"{where}: payload must be 'summary' or 'bins'")
        return PayloadMode.BINS_12FP if value == "bins" else PayloadMode.SUMMARY_1FP
    if key == "ppg":
        if value in ("off", "none", "0"):
            return None
        return PpgConfig(rate=int(value))
    if key in ("eeg_channels", "sample_rate", "gain", "hop_ms"):
        return int(value)
    if key == "stim_freqs":
        return tuple(float(v) for v in value.split())
    raise ScenarioError(f"{where}: unknown device parameter {key!r}")


_DEVICE_KEY_ALIASES = {"payload": "payload_mode"}


def parse_scenario(text: str, name: str = "<scenario>") -> Scenario:
    sc = Scenario()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{name}:{lineno}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("scenario", "device", "source", "link", "commands",
                               "imu", "reports"):
                raise ScenarioError(f"{where}: unknown section [{section}]")
            continue
        if section is None:
            raise ScenarioError(f"{where}: content before any [section]")

        if section == "commands":
            tokens = line.split()
            if len(tokens) < 3 or tokens[0] != "at":
                raise ScenarioError(f"{where}: expected 'at <seconds> <verb> ...'")
            try:
                t = float(tokens[1])
            except ValueError:
                raise ScenarioError(f"{where}: bad time {tokens[1]!r}") from None
            verb = tokens[2]
            if verb == "start":
                if len(tokens) != 4 or tokens[3] not in _MODE_WORDS:
                    raise ScenarioError(f"{where}: start needs 'streaming' or 'edge'")
                cmd = HostCommand(CommandKind.START, mode=_MODE_WORDS[tokens[3]])
            elif verb == "stop":
                cmd = HostCommand(CommandKind.STOP)
            elif verb == "sleep":
                cmd = HostCommand(CommandKind.SLEEP)
            elif verb == "set_mode":
                if len(tokens) != 4 or tokens[3] not in _MODE_WORDS:
                    raise ScenarioError(f"{where}: set_mode needs 'streaming' or 'edge'")
                cmd = HostCommand(CommandKind.SET_MODE, mode=_MODE_WORDS[tokens[3]])
            elif verb == "set_params":
                raw_params = _parse_params(tokens[3:], where)
                params = {_DEVICE_KEY_ALIASES.get(k, k): v for k, v in raw_params.items()}
                cmd = HostCommand(CommandKind.SET_PARAMS, params=params)
            else:
                raise ScenarioError(f"{where}: unknown command verb {verb!r}")
            sc.commands.append((t, cmd))
            continue

        if "=" not in line:
            raise ScenarioError(f"{where}: expected key = value")
        key, value = [p.strip() for p in line.split("=", 1)]
        try:
            if section == "scenario":
                if key == "name":
                    sc.name = value
                elif key == "seed":
                    sc.seed = int(value)
                elif key == "duration_s":
                    sc.duration_s = float(value)
                else:
                    raise ScenarioError(f"{where}: unknown scenario key {key!r}")
            elif section == "device":
                sc.device_kwargs[_DEVICE_KEY_ALIASES.get(key, key)] = \
                    _device_value(key, value, where)
            elif section == "source":
                sc.source_spec[key] = value
            elif section == "link":
                if key == "throughput_bps":
                    sc.link_kwargs["max_payload_throughput"] = float(value)
                elif key == "latency_us":
                    sc.link_kwargs["per_packet_latency_us"] = float(value)
                elif key == "outages":
                    spans = []
                    for span in value.split(","):
                        s, e = span.strip().split(":")
                        spans.append((float(s) * 1e6, float(e) * 1e6))
                    sc.link_kwargs["outages"] = spans
                else:
                    raise ScenarioError(f"{where}: unknown link key {key!r}")
            elif section == "imu":
                if key != "tap":
                    raise ScenarioError(f"{where}: unknown imu key {key!r}")
                sc.taps.extend(float(v) for v in value.split(","))
            elif section == "reports":
                sc.reports[key] = value
        except ScenarioError:
            raise
        except (ValueError, KeyError) as exc:
            raise ScenarioError(f"{where}: {exc}") from None
    sc.commands.sort(key=lambda pair: pair[0])
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), name=str(path))


# ---------------------------------------------------------------------------
# Signal sources
# ---------------------------------------------------------------------------

@dataclass
class Source:
    eeg: AnalogTrace | None = None
    ppg: dict = field(default_factory=dict)       # SignalKind -> AnalogTrace
    trial_windows: list = field(default_factory=list)
    segments: list = field(default_factory=list)  # (label, t0, t1)
    loop: bool = False

    def eeg_values(self, i0: int, i1: int) -> np.ndarray:
        return self._slice(self.eeg, i0, i1)

    def ppg_values(self, led: SignalKind, i0: int, i1: int) -> np.ndarray:
        return self._slice(self.ppg.get(led), i0, i1)

    def _slice(self, trace: AnalogTrace | None, i0: int, i1: int) -> np.ndarray:
        n = i1 - i0
        if trace is None or len(trace.values) == 0:
            return np.zeros(n)
        values = trace.values
        if self.loop:
            idx = np.arange(i0, i1) % len(values)
            return values[idx]
        out = np.zeros(n)
        j0 = min(i0, len(values))
        j1 = min(i1, len(values))
        out[:j1 - j0] = values[j0:j1]
        return out


def build_source(scenario: Scenario, config: DeviceConfig) -> Source:
    spec = dict(scenario.source_spec)
    kind = spec.get("type", "silence")
    fs = config.sample_rate
    seed = scenario.seed
    source = Source()

    if kind == "alpha":
        segments = spec.get("segments", "closed:30, open:30")
        t = 0.0
        pieces = []
        for i, part in enumerate(segment.strip() for segment in segments.split(",")):
            state_name, dur_s = part.split(":")
            duration = float(dur_s)
            state = EyeState.EYES_CLOSED if state_name.strip() == "closed" else EyeState.EYES_OPEN
            pieces.append(gen_alpha_eeg(state, duration, fs, seed + i).values)
            source.segments.append((state_name.strip(), t, t + duration))
            t += duration
        source.eeg = AnalogTrace(np.concatenate(pieces), fs, SignalKind.EEG)

    elif kind == "ssvep":
        stim = SsvepStimulus(
            frequencies=tuple(float(f) for f in spec.get(
                "frequencies", "1 3.125 7.8125 10.6125").replace(",", " ").split()),
            trial_duration=float(spec.get("trial_s", 25)),
            rest_duration=float(spec.get("rest_s", 10)),
            repetitions=int(spec.get("repetitions", 3)),
        )
        snr_db = float(spec.get("snr_db", 10))
        lead_in = float(spec.get("lead_in_s", 1.0))
        session = gen_ssvep_session(stim, fs, snr_db, seed)
        trace, windows = session.concatenate()
        lead = gen_background(lead_in, fs, seed + 99, rms=2e-6)
        values = np.concatenate([lead.values, trace.values])
        source.eeg = AnalogTrace(values, fs, SignalKind.EEG)
        source.trial_windows = [(t0 + lead_in, t1 + lead_in, label)
                                for t0, t1, label in windows]

    elif kind == "ppg":
        hr = float(spec.get("heart_rate", 60))
        duration = float(spec.get("duration_s", scenario.duration_s))
        rate = config.ppg.rate if config.ppg else 100
        source.ppg = {
            SignalKind.PPG_RED: gen_ppg(hr, duration, rate, SignalKind.PPG_RED, seed),
            SignalKind.PPG_IR: gen_ppg(hr, duration, rate, SignalKind.PPG_IR, seed + 1),
        }
        if config.eeg_channels:
            source.eeg = gen_background(duration, fs, seed + 2, rms=2e-6)

    elif kind == "silence":
        source.eeg = gen_background(scenario.duration_s + 1.0, fs, seed, rms=0.0)

    else:
        raise ScenarioError(f"unknown source type {kind!r}")

    return source


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

CMD_PAYLOAD_BITS = 16 * 8  # command packets are tiny and ride a loss-free channel


@dataclass
class RunResult:
    scenario: Scenario
    log: SessionLog
    device: Device
    ledger: EnergyLedger
    link: link_mod.Link
    dongle: link_mod.Dongle
    trial_results: list = field(default_factory=list)
    reports_written: dict = field(default_factory=dict)
    deadline_misses: int = 0


class ScenarioRunner:
    """Wires source -> AFE -> device -> link -> dongle -> host log on one
    deterministic event clock, then writes the requested reports."""

    LINK_STEP_US = 1000.0
    SNAPSHOT_PERIOD_US = 250_000.0

    def __init__(self, scenario: Scenario, out_dir=None, telemetry=None,
                 speed: float | None = None, loop: bool = False,
                 trace_path=None):
        self.scenario = scenario
        self.out_dir = Path(out_dir) if out_dir else Path.cwd()
        self.telemetry = telemetry
        self.speed = speed
        self.config = scenario.device_config()
        self._trace_fh = open(trace_path, "w") if trace_path else None
        hook = self._trace_line if self._trace_fh else None
        self.device = Device(self.config, seed=scenario.seed + 1000,
                             trace_hook=hook)
        self.link = link_mod.Link(link_mod.ChannelModel(**scenario.link_kwargs))
        self.dongle = link_mod.Dongle()
        self.ledger = EnergyLedger()
        self.source = build_source(scenario, self.config)
        self.source.loop = loop
        self.log = SessionLog(metadata={
            "scenario": scenario.name,
            "seed": scenario.seed,
            "duration_s": scenario.duration_s,
            "eeg_channels": self.config.eeg_channels,
            "sample_rate": self.config.sample_rate,
            "payload_mode": self.config.payload_mode.value,
            "ppg_rate": self.config.ppg.rate if self.config.ppg else 0,
            "trial_windows": self.source.trial_windows,
        })
        self.sched = Scheduler()
        self.reassembler = EdgeReassembler(self.config)
        self.deadline_misses = 0
        self._acq_cursor = 0
        self._ppg_cursor = 0
        self._last_energy_us = 0.0
        self._hop_scheduled = False
        self._decimation = max(1, int(round(self.config.sample_rate / 250)))
        self._wave_phase = 0
        self._rolling = np.zeros(0)
        self._recent_reports: list = []
        self._wall_start = None
        self._sim_start_us = 0.0
        self._capture_fh = None
        if "packet_log" in scenario.reports:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            self._capture_fh = open(self.out_dir / scenario.reports["packet_log"], "wb")

    def _trace_line(self, now_us: float, event: str, mode: str) -> None:
        self._trace_fh.write(f"{now_us:.0f} {event} {mode}\n")

    # -- energy & pacing -----------------------------------------------------

    def _advance(self, now_us: float) -> None:
        dt = now_us - self._last_energy_us
        if dt > 0:
            self.ledger.step(self.device.static_power_mw(), dt)
            self._last_energy_us = now_us
        if self.speed and self._wall_start is not None:
            target = self._wall_start + (now_us - self._sim_start_us) / (self.speed * 1e6)
            delay = target - _time.monotonic()
            if delay > 0:
                _time.sleep(delay)

    # -- telemetry helpers -----------------------------------------------------

    def _emit(self, message: dict) -> None:
        if self.telemetry:
            self.telemetry.broadcast(message)

    def _emit_state(self, t_us: float, ack=None, command_id=None) -> None:
        msg = {"type": "state", "t_ms": int(t_us // 1000), "mode": self.device.mode.value}
        if ack is not None:
            msg.update({"ack": ack.ok, "reason": ack.reason})
        if command_id is not None:
            msg["command_id"] = command_id
        self._emit(msg)

    def snapshot(self) -> dict:
        return {
            "type": "hello",
            "mode": self.device.mode.value,
            "t_ms": int(self.sched.now_us // 1000),
            "config": {
                "eeg_channels": self.config.eeg_channels,
                "sample_rate": self.config.sample_rate,
                "gain": self.config.gain,
                "hop_ms": self.config.hop_ms,
                "payload_mode": self.config.payload_mode.value,
                "stim_freqs": list(self.config.stim_freqs),
                "ppg": bool(self.config.ppg),
            },
        }

    # -- command handling -----------------------------------------------------

    def _apply_command(self, cmd: HostCommand, now_us: float, command_id=None):
        if cmd.kind is CommandKind.STOP:
            self._acquire_up_to(now_us)  # samples at the stop instant still count
        ack = self.device.handle_command(cmd, now_us)
        rx_us = CMD_PAYLOAD_BITS / self.link.channel.max_payload_throughput * 1e6
        if self.device.mode is not DeviceMode.SLEEP:
            self.ledger.charge(PowerDomain.RADIO, self.device.calibration.radio_rx_mw, rx_us)
        t_ms = int(now_us // 1000)
        self.log.log_event(t_ms, "command",
                           f"{cmd.kind.value}{'' if ack.ok else ' NACK:' + ack.reason}")
        if ack.ok:
            self.log.log_state(t_ms, ack.mode.value)
            self._after_transition(now_us)
        if cmd.kind is CommandKind.SET_PARAMS and ack.ok:
            self.config = self.device.config
            self.reassembler = EdgeReassembler(self.config)
            self._decimation = max(1, int(round(self.config.sample_rate / 250)))
        self._emit_state(now_us, ack, command_id)
        return ack

    def _after_transition(self, now_us: float) -> None:
        mode = self.device.mode
        if mode in (DeviceMode.STREAMING, DeviceMode.EDGE_COMPUTE):
            fs = self.config.sample_rate
            self._acq_cursor = int(np.floor(now_us * fs / 1e6))
            if self.config.ppg:
                self._ppg_cursor = int(np.floor(now_us * self.config.ppg.rate / 1e6))
            self._meas_t0_us = now_us
        if mode is DeviceMode.EDGE_COMPUTE and not self._hop_scheduled:
            self._hop_scheduled = True
            self.sched.schedule_in(self.config.hop_ms * 1000.0, Priority.HOP, self._on_hop)
        if mode is DeviceMode.CONNECTED_IDLE:
            for pkt in self.device.flush_stream():
                self.link.enqueue(pkt)

    # -- periodic events --------------------------------------------------------

    def _acquire_up_to(self, now_us: float) -> None:
        device = self.device
        if device.mode not in (DeviceMode.STREAMING, DeviceMode.EDGE_COMPUTE):
            return
        fs = self.config.sample_rate
        target = int(np.floor(now_us * fs / 1e6))
        if target <= self._acq_cursor:
            return
        values = self.source.eeg_values(self._acq_cursor, target)
        block = np.tile(values[:, None], (1, self.config.eeg_channels)) \
            if self.config.eeg_channels else np.zeros((len(values), 0))
        self._acq_cursor = target
        if device.mode is DeviceMode.STREAMING:
            self._stream_block(block, now_us)
        else:
            self._edge_block(block)

    def _on_block(self, now_us: float) -> None:
        self._acquire_up_to(now_us)
        self.sched.schedule_in(self._block_us(), Priority.SAMPLE, self._on_block)

    def _block_us(self) -> float:
        return min(10_000.0, self.config.hop_ms * 1000.0)

    def _ppg_frames_due(self, now_us: float):
        cfg = self.config.ppg
        frames = []
        if not cfg:
            return frames
        rate = cfg.rate
        target = int(np.floor(now_us * rate / 1e6))
        while self._ppg_cursor < target:
            i = self._ppg_cursor
            values = {led: float(self.source.ppg_values(led, i, i + 1)[0])
                      for led in cfg.leds}
            frames.append(self.device.ppg.sample(values, 0.0 if not hasattr(self, "_meas_t0_us")
                                                 else self._meas_t0_us))
            self._ppg_cursor += 1
        return frames

    def _stream_block(self, block: np.ndarray, now_us: float) -> None:
        device = self.device
        ppg_frames = self._ppg_frames_due(now_us)
        eeg_frames = device.afe.acquire(block, self._meas_t0_us) \
            if self.config.eeg_channels else []
        if not eeg_frames:
            for pf in ppg_frames:
                for pkt in device.run_streaming_tick(None, pf):
                    self.link.enqueue(pkt)
            return
        for i, frame in enumerate(eeg_frames):
            pf = ppg_frames.pop(0) if (ppg_frames and i == 0) else None
            for pkt in device.run_streaming_tick(frame, pf):
                self.link.enqueue(pkt)

    def _edge_block(self, block: np.ndarray) -> None:
        device = self.device
        frames = device.afe.acquire(block, self._meas_t0_us)
        if frames:
            codes = np.stack([f.codes for f in frames])
            device.ingest_edge(device.afe.dequantize(codes))

    def _on_hop(self, now_us: float) -> None:
        device = self.device
        if device.mode is not DeviceMode.EDGE_COMPUTE:
            self._hop_scheduled = False
            return
        packets, report, cycles = device.run_edge_hop(now_us)
        if cycles is not None:
            self.ledger.charge(PowerDomain.DIGITAL_1V8,
                               device.calibration.cluster_active_mw,
                               cycles.duration_s * 1e6)
            if cycles.deadline_missed:
                self.deadline_misses += 1
                self.log.log_event(int(now_us // 1000), "deadline_miss",
                                   f"{cycles.duration_s * 1e3:.3f} ms > hop")
        for pkt in packets:
            self.link.enqueue(pkt)
        self.sched.schedule_in(self.config.hop_ms * 1000.0, Priority.HOP, self._on_hop)

    def _on_link(self, now_us: float) -> None:
        deliveries, radio_us = self.link.transmit_step(now_us, self.LINK_STEP_US)
        if radio_us > 0 and self.device.mode is not DeviceMode.SLEEP:
            self.ledger.charge(PowerDomain.RADIO, self.device.calibration.radio_tx_mw, radio_us)
        for d in deliveries:
            self.sched.schedule(max(d.time_us, now_us), Priority.LINK,
                                lambda t, pkt=d.packet: self._on_dongle(pkt, t))
        self.sched.schedule_in(self.LINK_STEP_US, Priority.LINK, self._on_link)

    def _on_dongle(self, packet: link_mod.Packet, now_us: float) -> None:
        if self._capture_fh:
            raw = packet.to_bytes()
            self._capture_fh.write(len(raw).to_bytes(2, "big") + raw)
        for event in self.dongle.receive(packet):
            if isinstance(event, link_mod.LossEvent):
                self.log.loss_count += event.count
                self.log.log_event(int(now_us // 1000), "loss",
                                   f"count={event.count} expected={event.expected_seq}")
                self._emit({"type": "loss", "t_ms": int(now_us // 1000),
                            "count": event.count})
            elif isinstance(event, link_mod.DataEvent):
                self._consume(event.packet)

    def _consume(self, packet: link_mod.Packet) -> None:
        cfg = self.config
        n_leds = len(cfg.ppg.leds) if cfg.ppg else 0
        if packet.type is link_mod.PacketType.RAW_EEG:
            codes = link_mod.unframe_raw(packet, cfg.eeg_channels)
            volts = codes * cfg.exg_config().lsb_volts
            self.log.sample_blocks.append(SampleBlock(packet.timestamp_ms, packet.seq, volts))
            self._telemetry_samples(packet.timestamp_ms, volts)
        elif packet.type is link_mod.PacketType.RAW_MIXED:
            codes = link_mod.unframe_raw(packet, cfg.eeg_channels, n_leds)
            volts = codes[:, :cfg.eeg_channels] * cfg.exg_config().lsb_volts
            self.log.sample_blocks.append(SampleBlock(packet.timestamp_ms, packet.seq, volts))
            ppg_vals = self.device.ppg.dequantize(codes[:, cfg.eeg_channels:])
            self.log.ppg_blocks.append(PpgBlock(packet.timestamp_ms, packet.seq, ppg_vals))
            self._telemetry_samples(packet.timestamp_ms, volts)
        elif packet.type is link_mod.PacketType.RAW_PPG:
            codes = link_mod.unframe_raw(packet, 0, n_leds)
            ppg_vals = self.device.ppg.dequantize(codes)
            self.log.ppg_blocks.append(PpgBlock(packet.timestamp_ms, packet.seq, ppg_vals))
        elif packet.type is link_mod.PacketType.EDGE_RESULT:
            result = self.reassembler.add(packet)
            if result is None:
                return
            if isinstance(result, dsp.SsvepBinReport):
                self.log.bin_records.append(BinRecord(packet.timestamp_ms, result))
                self._recent_reports.append(result)
                if len(self._recent_reports) > 100:
                    self._recent_reports.pop(0)
                pooled = np.sum([r.powers.sum(axis=0) for r in self._recent_reports], axis=0)
                classified = float(result.stim_freqs[int(np.argmax(pooled))])
                self._emit({"type": "bins", "t_ms": packet.timestamp_ms,
                            "freqs": list(result.stim_freqs),
                            "powers": [float(p) for p in result.powers.sum(axis=0)],
                            "agg": [float(p) for p in pooled],
                            "classified": classified})
            else:
                self.log.log_event(packet.timestamp_ms, "summary",
                                   ",".join(f"{v:.4g}" for v in result))
                self._emit({"type": "summary", "t_ms": packet.timestamp_ms,
                            "values": [float(v) for v in result]})

    def _telemetry_samples(self, t_ms: int, volts: np.ndarray) -> None:
        if not self.telemetry:
            return
        rows = []
        for row in volts:
            if self._wave_phase == 0:
                rows.append([float(v) for v in row])
            self._wave_phase = (self._wave_phase + 1) % self._decimation
        buf = np.concatenate([self._rolling, volts[:, 0]]) if volts.size else self._rolling
        self._rolling = buf[-4096:]
        if rows:
            self._emit({"type": "samples", "t_ms": t_ms,
                        "fs": self.config.sample_rate / self._decimation, "rows": rows})

    def _on_snapshot(self, now_us: float) -> None:
        t_ms = int(now_us // 1000)
        self._emit({"type": "link", "t_ms": t_ms,
                    "emitted": self.link.emitted, "delivered": self.link.delivered,
                    "dropped": self.link.dropped, "occupancy": self.link.ring.occupancy})
        snap = self.ledger.snapshot()
        self._emit({"type": "energy", "t_ms": t_ms, "average_mw": snap["average_mw"],
                    "total_uj": snap["total_uj"], "domains_uj": snap["domains_uj"]})
        if self.telemetry and len(self._rolling) >= 1024 \
                and self.device.mode is DeviceMode.STREAMING:
            trace = AnalogTrace(self._rolling.copy(), self.config.sample_rate)
            est = dsp.psd(trace, 1024, 768)
            self._emit({"type": "psd", "t_ms": t_ms,
                        "freqs": [float(f) for f in est.freqs[::2]],
                        "power": [float(p) for p in est.power[::2]]})
        self.sched.schedule_in(self.SNAPSHOT_PERIOD_US, Priority.REPORT, self._on_snapshot)

    def _poll_inbound(self, now_us: float) -> None:
        if self.telemetry:
            for client, msg in self.telemetry.drain_inbound():
                reply = self._handle_inbound(msg, now_us)
                if reply is not None:
                    self.telemetry.send(client, reply)
        self.sched.schedule_in(5000.0, Priority.COMMAND, self._poll_inbound)

    def _handle_inbound(self, msg: dict, now_us: float):
        kind = msg.get("type")
        if kind == "command":
            try:
                cmd = command_from_json(msg)
            except (KeyError, ValueError) as exc:
                return {"type": "error", "message": str(exc), "id": msg.get("id")}
            ack = self._apply_command(cmd, now_us, command_id=msg.get("id"))
            return {"type": "ack", "id": msg.get("id"), "ok": ack.ok,
                    "mode": ack.mode.value, "reason": ack.reason}
        if kind == "tap":
            woke = self.device.wake_tap(now_us)
            if woke:
                self.log.log_state(int(now_us // 1000), self.device.mode.value)
                self._emit_state(now_us)
            return {"type": "ack", "id": msg.get("id"), "ok": woke,
                    "mode": self.device.mode.value,
                    "reason": "" if woke else "not asleep"}
        if kind == "hello":
            return self.snapshot()
        return {"type": "error", "message": f"unknown message type {kind!r}",
                "id": msg.get("id")}

    # -- main entry -------------------------------------------------------------

    def prime(self) -> None:
        """Schedule boot, the command/tap script, and the periodic machinery.
        run()/run_forever() call this; tests may prime and step manually."""
        self._wall_start = _time.monotonic()
        self._sim_start_us = 0.0
        self._meas_t0_us = 0.0
        self.sched.schedule(1000.0, Priority.COMMAND,
                            lambda t: (self.device.boot_complete(t),
                                       self.log.log_state(int(t // 1000),
                                                          self.device.mode.value),
                                       self._emit_state(t)))
        for t_s, cmd in self.scenario.commands:
            self.sched.schedule(t_s * 1e6, Priority.COMMAND,
                                lambda t, c=cmd: self._apply_command(c, t))
        for t_s in self.scenario.taps:
            def _tap(t, ts=t_s):
                if self.device.wake_tap(t):
                    self.log.log_state(int(t // 1000), self.device.mode.value)
                    self._emit_state(t)
            self.sched.schedule(t_s * 1e6, Priority.COMMAND, _tap)
        self.sched.schedule(self._block_us(), Priority.SAMPLE, self._on_block)
        self.sched.schedule(self.LINK_STEP_US, Priority.LINK, self._on_link)
        self.sched.schedule(self.SNAPSHOT_PERIOD_US, Priority.REPORT, self._on_snapshot)
        if self.telemetry:
            self.sched.schedule(5000.0, Priority.COMMAND, self._poll_inbound)

    def step_to(self, t_us: float) -> None:
        self.sched.run_until(t_us, before_event=self._advance)

    def run(self, drain_s: float = 2.0) -> RunResult:
        sc = self.scenario
        self.prime()
        end_us = sc.duration_s * 1e6
        self.sched.run_until(end_us, before_event=self._advance)
        # Let the ring drain so loss-free logs are complete.
        drained_until = end_us
        while self.link.ring.occupancy and drained_until < end_us + drain_s * 1e6:
            drained_until += self.LINK_STEP_US * 50
            self.sched.run_until(drained_until, before_event=self._advance)

        result = RunResult(scenario=sc, log=self.log, device=self.device,
                           ledger=self.ledger, link=self.link, dongle=self.dongle,
                           deadline_misses=self.deadline_misses)
        if self.source.trial_windows and self.log.bin_records:
            window_s = self.config.fft_size / self.config.sample_rate
            result.trial_results = classify_trials(self.log.bin_records,
                                                   self.source.trial_windows, window_s)
        self._write_reports(result)
        if self._trace_fh:
            self._trace_fh.close()
            self._trace_fh = None
        return result

    def run_forever(self, tick_s: float = 0.2) -> None:
        """Serve mode: advance indefinitely (sources loop); Ctrl-C to stop."""
        self.prime()
        t = 0.0
        while True:
            t += tick_s * 1e6
            self.sched.run_until(t, before_event=self._advance)
            # Keep the raw-sample log bounded during open-ended serving.
            if len(self.log.sample_blocks) > 4000:
                del self.log.sample_blocks[:2000]

    # -- reports ---------------------------------------------------------------

    def _write_reports(self, result: RunResult) -> None:
        reports = self.scenario.reports
        if not reports:
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        fs = self.config.sample_rate
        eeg = self.log.eeg_array()

        if "psd" in reports and eeg.size:
            trace = AnalogTrace(eeg[:, 0], fs, SignalKind.EEG)
            path = self.out_dir / reports["psd"]
            if self.source.segments:
                # Per-segment spectra side by side, plus the band-power ratio.
                window, overlap = 1024, 768
                columns, labels = [], []
                t0_log = self.log.sample_blocks[0].t_ms / 1000.0 if self.log.sample_blocks else 0
                for label, t0, t1 in self.source.segments:
                    i0 = max(int((t0 - t0_log) * fs), 0)
                    i1 = min(int((t1 - t0_log) * fs), eeg.shape[0])
                    if i1 - i0 >= window:
                        seg = AnalogTrace(eeg[i0:i1, 0], fs, SignalKind.EEG)
                        est = dsp.psd(seg, window, overlap)
                        columns.append(est.power)
                        labels.append(label)
                freqs = np.arange(window // 2 + 1) * (fs / window)
                with open(path, "w") as fh:
                    fh.write("frequency_hz," + ",".join(labels) + "\n")
                    for i, f in enumerate(freqs):
                        fh.write(f"{f:.6g}," + ",".join(repr(float(c[i])) for c in columns) + "\n")
            else:
                dsp.psd(trace, 1024, 768).to_csv(path)
            result.reports_written["psd"] = path

        if "spectrogram" in reports and eeg.size:
            trace = AnalogTrace(eeg[:, 0], fs, SignalKind.EEG)
            if len(trace.values) >= 1024:
                path = self.out_dir / reports["spectrogram"]
                dsp.spectrogram(trace, 1024, 768).to_csv(path)
                result.reports_written["spectrogram"] = path

        if "classification" in reports and result.trial_results:
            path = self.out_dir / reports["classification"]
            with open(path, "w") as fh:
                fh.write("trial,t_start_s,t_end_s,label_hz,predicted_hz,hops,correct\n")
                for r in result.trial_results:
                    fh.write(f"{r.index},{r.t_start},{r.t_end},{r.label},"
                             f"{r.predicted},{r.hops},{int(bool(r.correct))}\n")
            result.reports_written["classification"] = path

        if "power" in reports:
            path = self.out_dir / reports["power"]
            text = power_report_text(self.ledger.snapshot(), fs, self.config.eeg_channels)
            path.write_text(text + "\n")
            result.reports_written["power"] = path

        if "bandwidth" in reports:
            path = self.out_dir / reports["bandwidth"]
            cfg = self.config
            stream_bps = link_mod.required_throughput(
                cfg.eeg_channels, fs,
                ppg_rate=cfg.ppg.rate if cfg.ppg else 0,
                n_leds=len(cfg.ppg.leds) if cfg.ppg else 0)
            edge_bps = link_mod.required_throughput(
                cfg.eeg_channels, fs, edge=True, hop_ms=cfg.hop_ms,
                values_per_channel=cfg.values_per_channel)
            lines = [
                f"streaming offered: {stream_bps:.0f} bps",
                f"edge offered: {edge_bps:.0f} bps",
                f"reduction: {link_mod.reduction_ratio(stream_bps, edge_bps):.2%}",
                f"link cap: {self.link.channel.max_payload_throughput:.0f} bps",
                f"emitted: {self.link.emitted}, delivered: {self.link.delivered}, "
                f"dropped: {self.link.dropped}",
            ]
            path.write_text("\n".join(lines) + "\n")
            result.reports_written["bandwidth"] = path

        if "log_dir" in reports:
            log_dir = self.out_dir / reports["log_dir"]
            self.log.save(log_dir)
            if eeg.size:
                self.log.save_binary_traces(log_dir, fs)
            result.reports_written["log_dir"] = log_dir

        if self._capture_fh:
            self._capture_fh.close()
            self._capture_fh = None
            result.reports_written["packet_log"] = self.out_dir / reports["packet_log"]


def command_from_json(msg: dict) -> HostCommand:
    """Telemetry-message form of a host command."""
    kind = CommandKind(msg["kind"])
    mode = None
    if msg.get("mode"):
        mode = DeviceMode(msg["mode"])
    params = None
    if msg.get("params"):
        params = {}
        for key, value in msg["params"].items():
            if key == "payload_mode":
                params[key] = PayloadMode(value)
            elif key == "ppg":
                params[key] = PpgConfig(rate=int(value)) if value else None
            elif key == "stim_freqs":
                params[key] = tuple(float(v) for v in value)
            else:
                params[key] = int(value)
    return HostCommand(kind, mode=mode, params=params)


def run_scenario(path_or_scenario, out_dir=None, **kwargs) -> RunResult:
    scenario = path_or_scenario
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    return ScenarioRunner(scenario, out_dir=out_dir, **kwargs).run()
