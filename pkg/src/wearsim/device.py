"""Simulated wearable firmware: operating-mode state machine, raw-sample
packetization, sliding-window edge DSP with a fixed result cadence, and the
compute-cluster cycle/time/energy cost model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import dsp, link
from .afe import AfeMode, ExgAfe, ExgAfeConfig, PpgConfig, PpgSensor, exg_power
from .energy import PowerCalibration, PowerDomain
from .signals import SignalKind


class DeviceMode(enum.Enum):
    BOOT = "BOOT"
    CONNECTED_IDLE = "CONNECTED_IDLE"
    STREAMING = "STREAMING"
    EDGE_COMPUTE = "EDGE_COMPUTE"
    SLEEP = "SLEEP"


class PayloadMode(enum.Enum):
    SUMMARY_1FP = "summary"   # one float per channel per hop
    BINS_12FP = "bins"        # 4 stimuli x 3 harmonics per channel per hop


class CommandKind(enum.Enum):
    SET_MODE = "SET_MODE"
    START = "START"
    STOP = "STOP"
    SET_PARAMS = "SET_PARAMS"
    SLEEP = "SLEEP"


@dataclass
class HostCommand:
    kind: CommandKind
    mode: DeviceMode | None = None
    params: dict | None = None


@dataclass
class CommandAck:
    ok: bool
    mode: DeviceMode
    reason: str = ""


DEFAULT_STIM_FREQS = (1.0, 3.125, 7.8125, 10.6125)
DEFAULT_HOP_MS = 50


def fft_size_for_rate(sample_rate: float) -> int:
    """Smallest supported power of two covering one second of samples."""
    for n in dsp.ALLOWED_FFT_SIZES:
        if n >= sample_rate:
            return n
    raise ValueError(f"no supported FFT size covers 1 s at {sample_rate} SPS")


@dataclass
class DeviceConfig:
    eeg_channels: int = 8
    sample_rate: int = 1000
    gain: int = 6
    ppg: PpgConfig | None = None
    hop_ms: int = DEFAULT_HOP_MS
    payload_mode: PayloadMode = PayloadMode.SUMMARY_1FP
    stim_freqs: tuple = DEFAULT_STIM_FREQS
    afe_mode: AfeMode = AfeMode.HIGH_RESOLUTION
    noise_density: float | None = None

    def __post_init__(self):
        if self.hop_ms * self.sample_rate < 1000:
            raise ValueError("hop must cover at least one sample")
        self.exg_config()  # validates channels/gain/rate

    @property
    def fft_size(self) -> int:
        return fft_size_for_rate(self.sample_rate)

    @property
    def hop_samples(self) -> int:
        return self.hop_ms * self.sample_rate // 1000

    def exg_config(self) -> ExgAfeConfig:
        kwargs = dict(active_channels=self.eeg_channels, gain=self.gain,
                      data_rate=self.sample_rate, mode=self.afe_mode)
        if self.noise_density is not None:
            kwargs["noise_density"] = self.noise_density
        return ExgAfeConfig(**kwargs)

    @property
    def values_per_channel(self) -> int:
        return 1 if self.payload_mode is PayloadMode.SUMMARY_1FP else 12


# ---------------------------------------------------------------------------
# Compute-cluster cost model
# ---------------------------------------------------------------------------

@dataclass
class ClusterCostModel:
    """Cycle/time cost of the FFT batch on the parallel compute cluster.

    The per-transform cycle count includes the DMA share that stages data
    for each transform; a batch is the simple sum. Other sizes scale with
    n*log2(n) from the 1024-point anchor.
    """

    clock_hz: float = 240e6
    core_voltage: float = 0.65
    cycles_fft_1024: int = 12750
    parallel_speedup: float = 5.3
    flops_per_nlogn: float = 2.5
    cores: int = 8

    def cycles_per_fft(self, n: int, cores: int | None = None) -> float:
        scale = (n * math.log2(n)) / (1024 * 10)
        cycles = self.cycles_fft_1024 * scale
        if (cores or self.cores) == 1:
            cycles *= self.parallel_speedup
        return cycles

    def batch_cycles(self, n: int, count: int, cores: int | None = None) -> float:
        return self.cycles_per_fft(n, cores) * count

    def batch_time_s(self, n: int, count: int, cores: int | None = None) -> float:
        return self.batch_cycles(n, count, cores) / self.clock_hz

    def flops_per_fft(self, n: int) -> float:
        return self.flops_per_nlogn * n * math.log2(n)


def task_efficiency_mflops_per_mw(cost: ClusterCostModel, cluster_power_mw: float,
                                  n: int = 1024, count: int = 8) -> float:
    """Sustained flop rate during the batch divided by cluster power."""
    if cluster_power_mw <= 0:
        raise ValueError("cluster power must be positive")
    t = cost.batch_time_s(n, count)
    if t == 0:
        return 0.0
    rate_mflops = cost.flops_per_fft(n) * count / t / 1e6
    return rate_mflops / cluster_power_mw


@dataclass
class CycleReport:
    cycles: float
    duration_s: float
    energy_uj: float
    cores: int
    deadline_missed: bool = False


# ---------------------------------------------------------------------------
# Device
# ---------------------------------------------------------------------------

class Device:
    """Event-driven firmware model. The surrounding simulation feeds it
    acquired frames and hop triggers; it produces link packets, command
    acknowledgments, and per-burst compute cost reports."""

    def __init__(self, config: DeviceConfig | None = None,
                 calibration: PowerCalibration | None = None,
                 cost_model: ClusterCostModel | None = None,
                 seed: int = 0, trace_hook=None):
        self.config = config or DeviceConfig()
        self.calibration = calibration or PowerCalibration()
        self.cost = cost_model or ClusterCostModel()
        self.mode = DeviceMode.BOOT
        self.armed_mode = DeviceMode.STREAMING
        self.config_id = 0
        self._seed = seed
        self._trace_hook = trace_hook
        self.data_seq = 0
        self.samples_acquired = 0
        self._rebuild_frontends()
        self._reset_buffers()

    # -- lifecycle ---------------------------------------------------------

    def _rebuild_frontends(self) -> None:
        self.afe = ExgAfe(self.config.exg_config(), seed=self._seed)
        self.ppg = PpgSensor(self.config.ppg) if self.config.ppg else None

    def _reset_buffers(self) -> None:
        cfg = self.config
        self._pending_frames: list[bytes] = []
        self._pending_first_ts_ms = 0
        n = fft_size_for_rate(cfg.sample_rate) if cfg.sample_rate <= 4096 else 0
        self._edge_window = np.zeros((cfg.eeg_channels, n), dtype=np.float32)
        self._edge_filled = 0
        self._held_ppg_codes = None

    def _trace(self, now_us: float, event: str) -> None:
        if self._trace_hook:
            self._trace_hook(now_us, event, self.mode.value)

    def boot_complete(self, now_us: float = 0.0) -> None:
        if self.mode is DeviceMode.BOOT:
            self.mode = DeviceMode.CONNECTED_IDLE
            self._trace(now_us, "boot_complete")

    # -- command handling ----------------------------------------------------

    def handle_command(self, cmd: HostCommand, now_us: float = 0.0) -> CommandAck:
        """Apply one host command; illegal transitions leave the state
        unchanged and come back as a NACK with the reason."""
        mode = self.mode
        if mode is DeviceMode.SLEEP:
            return CommandAck(False, mode, "asleep: only a double-tap wakes the device")
        if mode is DeviceMode.BOOT:
            return CommandAck(False, mode, "still booting")

        kind = cmd.kind
        if kind is CommandKind.START:
            if mode is not DeviceMode.CONNECTED_IDLE:
                return CommandAck(False, mode, f"cannot start from {mode.value}")
            target = cmd.mode or self.armed_mode
            if target not in (DeviceMode.STREAMING, DeviceMode.EDGE_COMPUTE):
                return CommandAck(False, mode, f"{target.value} is not a measurement mode")
            self.mode = target
            self._begin_measurement()
            self._trace(now_us, f"start:{target.value}")
            return CommandAck(True, self.mode)

        if kind is CommandKind.STOP:
            if mode not in (DeviceMode.STREAMING, DeviceMode.EDGE_COMPUTE):
                return CommandAck(False, mode, "nothing to stop")
            self.mode = DeviceMode.CONNECTED_IDLE
            self._trace(now_us, "stop")
            return CommandAck(True, self.mode)

        if kind is CommandKind.SET_MODE:
            if mode is not DeviceMode.CONNECTED_IDLE:
                return CommandAck(False, mode, "mode can only be armed while idle")
            if cmd.mode not in (DeviceMode.STREAMING, DeviceMode.EDGE_COMPUTE):
                return CommandAck(False, mode, "can only arm a measurement mode")
            self.armed_mode = cmd.mode
            return CommandAck(True, self.mode)

        if kind is CommandKind.SET_PARAMS:
            if mode is not DeviceMode.CONNECTED_IDLE:
                return CommandAck(False, mode, "parameters can only change while idle")
            if not cmd.params:
                return CommandAck(False, mode, "empty parameter set")
            try:
                new_config = replace(self.config, **cmd.params)
            except (TypeError, ValueError) as exc:
                return CommandAck(False, mode, f"bad parameters: {exc}")
            self.config = new_config
            self.config_id = (self.config_id + 1) & 0xFF
            self._rebuild_frontends()
            self._reset_buffers()
            self._trace(now_us, "set_params")
            return CommandAck(True, self.mode)

        if kind is CommandKind.SLEEP:
            if mode is not DeviceMode.CONNECTED_IDLE:
                return CommandAck(False, mode, "sleep only from the idle state")
            self.mode = DeviceMode.SLEEP
            self._trace(now_us, "sleep")
            return CommandAck(True, self.mode)

        return CommandAck(False, mode, f"unknown command {kind}")

    def wake_tap(self, now_us: float = 0.0) -> bool:
        """IMU double-tap interrupt: wakes from SLEEP, ignored otherwise."""
        if self.mode is DeviceMode.SLEEP:
            self.mode = DeviceMode.CONNECTED_IDLE
            self._trace(now_us, "wake_tap")
            return True
        return False

    def _begin_measurement(self) -> None:
        self.afe.reset()
        if self.ppg:
            self.ppg.reset()
        self._reset_buffers()
        self.samples_acquired = 0

    # -- streaming ----------------------------------------------------------

    @property
    def frame_bytes(self) -> int:
        cfg = self.config
        if cfg.eeg_channels and cfg.ppg:
            return link.mixed_frame_bytes(cfg.eeg_channels, len(cfg.ppg.leds))
        if cfg.eeg_channels:
            return link.eeg_frame_bytes(cfg.eeg_channels)
        if cfg.ppg:
            return 4 * len(cfg.ppg.leds)
        return 0

    @property
    def packet_type(self) -> link.PacketType:
        cfg = self.config
        if cfg.eeg_channels and cfg.ppg:
            return link.PacketType.RAW_MIXED
        if cfg.eeg_channels:
            return link.PacketType.RAW_EEG
        return link.PacketType.RAW_PPG

    def run_streaming_tick(self, frame, ppg_frame=None) -> list[link.Packet]:
        """Buffer one acquisition frame; emit a packet each time the payload
        fills. In mixed mode the most recent pulse-sensor codes ride along
        with every biopotential frame (they refresh at their own rate)."""
        if self.mode is not DeviceMode.STREAMING:
            raise RuntimeError("device is not streaming")
        cfg = self.config
        if ppg_frame is not None:
            self._held_ppg_codes = ppg_frame.codes
        if cfg.eeg_channels == 0 and cfg.ppg is None:
            return []
        if cfg.eeg_channels == 0:
            if ppg_frame is None:
                return []
            encoded = link.encode_ppg_frame(ppg_frame.codes)
            ts_ms = int(ppg_frame.timestamp_us // 1000)
        elif cfg.ppg:
            if frame is None:
                return []
            held = self._held_ppg_codes
            if held is None:
                held = np.zeros(len(cfg.ppg.leds), dtype=np.int64)
            encoded = link.encode_mixed_frame(frame.codes, held)
            ts_ms = int(frame.timestamp_us // 1000)
        else:
            if frame is None:
                return []
            encoded = link.encode_eeg_frame(frame.codes)
            ts_ms = int(frame.timestamp_us // 1000)

        if not self._pending_frames:
            self._pending_first_ts_ms = ts_ms
        self._pending_frames.append(encoded)
        self.samples_acquired += 0 if frame is None else 1

        per_packet = link.frames_per_packet(self.frame_bytes)
        if len(self._pending_frames) < per_packet:
            return []
        payload = b"".join(self._pending_frames[:per_packet])
        del self._pending_frames[:per_packet]
        packet = link.Packet(self.packet_type, self.data_seq % link.SEQ_MOD,
                             self._pending_first_ts_ms, self.config_id, payload)
        self.data_seq += 1
        return [packet]

    def flush_stream(self) -> list[link.Packet]:
        """Emit any partial packet (called on stop so logs stay complete)."""
        if not self._pending_frames:
            return []
        payload = b"".join(self._pending_frames)
        self._pending_frames = []
        packet = link.Packet(self.packet_type, self.data_seq % link.SEQ_MOD,
                             self._pending_first_ts_ms, self.config_id, payload)
        self.data_seq += 1
        return [packet]

    # -- edge compute ---------------------------------------------------------

    def ingest_edge(self, block: np.ndarray) -> None:
        """Append an (n_samples, channels) block of input-referred volts to
        the per-channel sliding window."""
        if self.mode is not DeviceMode.EDGE_COMPUTE:
            raise RuntimeError("device is not in edge-compute mode")
        x = np.asarray(block, dtype=np.float32).T  # (ch, n)
        n = self._edge_window.shape[1]
        k = x.shape[1]
        if k >= n:
            self._edge_window[:, :] = x[:, -n:]
        else:
            self._edge_window[:, :-k] = self._edge_window[:, k:]
            self._edge_window[:, -k:] = x
        self._edge_filled = min(self._edge_filled + k, n)
        self.samples_acquired += k

    def edge_ready(self) -> bool:
        return self._edge_filled >= self._edge_window.shape[1]

    def run_edge_hop(self, now_us: float = 0.0):
        """One result cadence tick: batch-FFT all channels, extract the
        stimulus bin powers, and emit the result packet(s).

        Returns (packets, report, cycle_report); packets is empty while the
        window is still priming or when a deadline overrun skips the hop.
        """
        if self.mode is not DeviceMode.EDGE_COMPUTE:
            raise RuntimeError("device is not in edge-compute mode")
        if not self.edge_ready():
            return [], None, None
        cfg = self.config
        n = self._edge_window.shape[1]
        cycles = self.cost.batch_cycles(n, cfg.eeg_channels)
        duration_s = cycles / self.cost.clock_hz
        energy_uj = self.calibration.cluster_active_mw * duration_s * 1e3
        missed = duration_s * 1000.0 > cfg.hop_ms
        cycle_report = CycleReport(cycles=cycles, duration_s=duration_s,
                                   energy_uj=energy_uj, cores=self.cost.cores,
                                   deadline_missed=missed)
        if missed:
            return [], None, cycle_report

        spectra = dsp.rfft_array(self._edge_window)
        reports = []
        for ch in range(cfg.eeg_channels):
            spec = dsp.Spectrum(bins=spectra[ch], fs=cfg.sample_rate, n=n)
            reports.append(dsp.ssvep_bin_power(spec, cfg.stim_freqs))
        report = dsp.SsvepBinReport.stack(reports)

        if cfg.payload_mode is PayloadMode.SUMMARY_1FP:
            values = report.summary
        else:
            values = report.harmonic_powers.reshape(cfg.eeg_channels, -1)
        packets = link.frame_edge(values, self.data_seq, int(now_us // 1000), self.config_id)
        self.data_seq += len(packets)
        return packets, report, cycle_report

    # -- power ----------------------------------------------------------------

    def static_power_mw(self) -> dict:
        """Constant per-domain draw for the current mode; radio on-air time
        and compute bursts are charged separately as they occur."""
        cal = self.calibration
        measuring = self.mode in (DeviceMode.STREAMING, DeviceMode.EDGE_COMPUTE)
        powers = {
            PowerDomain.DIGITAL_1V8: cal.digital_for_mode(self.mode.value),
            PowerDomain.IMU_LDO: cal.imu_mw,
            PowerDomain.ANALOG_3V0: exg_power(self.config.exg_config()) if measuring else 0.0,
            PowerDomain.LED_4V2: (self.config.ppg.supply_power_mw
                                  if (measuring and self.config.ppg) else 0.0),
            PowerDomain.RADIO: 0.0,
        }
        return powers
