"""Behavioral front-end models: 8-channel 24-bit biopotential AFE, optical
pulse sensor, inertial double-tap wake source, and contact-impedance stub.

These are sample-accurate input/output models (filtering, gain, noise,
quantization, power draw), not register-level chip emulations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter, lfilter_zi

from .signals import SignalKind

SUPPORTED_GAINS = (1, 2, 3, 4, 6, 8, 12)
SUPPORTED_RATES = (250, 500, 1000, 2000, 4000, 8000, 16000, 32000)
MAX_CHANNELS = 8

ADC_BITS = 24
CODE_MIN = -(1 << 23)
CODE_MAX = (1 << 23) - 1

# Anti-alias pole sits at 0.262x the data rate (262 Hz at 1 kSPS) and scales
# proportionally with the configured rate.
CUTOFF_RATIO = 0.262

# White input-referred noise density calibrated so that a 0.5-100 Hz
# integration yields 0.47 uV RMS: 0.47e-6 / sqrt(99.5) V/sqrt(Hz).
DEFAULT_NOISE_DENSITY = 0.47e-6 / math.sqrt(99.5)


class AfeMode(enum.Enum):
    HIGH_RESOLUTION = "high_resolution"
    LOW_POWER = "low_power"


@dataclass
class ExgAfeConfig:
    active_channels: int = 8
    gain: int = 6
    data_rate: int = 1000
    mode: AfeMode = AfeMode.HIGH_RESOLUTION
    vref: float = 2.4
    noise_density: float = DEFAULT_NOISE_DENSITY

    def __post_init__(self):
        if not 0 <= self.active_channels <= MAX_CHANNELS:
            raise ValueError(f"active_channels must be 0..{MAX_CHANNELS}")
        if self.gain not in SUPPORTED_GAINS:
            raise ValueError(f"gain {self.gain} not in {SUPPORTED_GAINS}")
        if self.data_rate not in SUPPORTED_RATES:
            raise ValueError(f"data_rate {self.data_rate} not in {SUPPORTED_RATES}")

    @property
    def lsb_volts(self) -> float:
        """Input-referred LSB: full scale is vref/gain across 2^23 codes."""
        return self.vref / (self.gain * (1 << 23))

    @property
    def full_scale_volts(self) -> float:
        return self.vref / self.gain

    @property
    def sample_period_us(self) -> float:
        return 1e6 / self.data_rate


@dataclass
class QuantizedFrame:
    """One acquisition instant: signed 24-bit codes for the active channels."""

    codes: np.ndarray
    sequence: int
    timestamp_us: float
    saturated: bool = False


class ExgAfe:
    """Sampling front end: one-pole anti-alias filter, PGA gain, additive
    input-referred noise, 24-bit quantization. Filter state persists across
    acquire() calls so streaming is seamless."""

    def __init__(self, cfg: ExgAfeConfig, seed: int = 0):
        self.cfg = cfg
        self._rng = np.random.default_rng(np.random.SeedSequence([seed, 0xAFE]))
        # Pole placed so |H| is -3 dB at CUTOFF_RATIO * data_rate.
        c = math.cos(2 * math.pi * CUTOFF_RATIO)
        self._pole = (2 - c) - math.sqrt((2 - c) ** 2 - 1)
        self._b = np.array([1.0 - self._pole])
        self._a = np.array([1.0, -self._pole])
        self._zi = None  # (channels, 1) filter state
        self._seq = 0

    @property
    def sequence(self) -> int:
        return self._seq

    def reset(self) -> None:
        self._zi = None
        self._seq = 0

    def acquire(self, channel_values: np.ndarray, t0_us: float) -> list[QuantizedFrame]:
        """Digitize a block of input samples.

        channel_values: (n_samples, active_channels) volts at the configured
        data rate. Returns one QuantizedFrame per input row; sequence numbers
        are gapless and timestamps advance by exactly one sample period.
        """
        cfg = self.cfg
        x = np.atleast_2d(np.asarray(channel_values, dtype=np.float64))
        if x.shape[1] != cfg.active_channels:
            raise ValueError(f"expected {cfg.active_channels} channels, got {x.shape[1]}")
        n = x.shape[0]
        if n == 0 or cfg.active_channels == 0:
            return []
        if self._zi is None:
            # Start the one-pole filter settled at the first input value.
            self._zi = lfilter_zi(self._b, self._a)[None, :] * x[0][:, None]
        filtered, self._zi = lfilter(self._b, self._a, x, axis=0, zi=self._zi.T)
        self._zi = self._zi.T
        if cfg.noise_density > 0:
            sigma = cfg.noise_density * math.sqrt(cfg.data_rate / 2.0)
            filtered = filtered + self._rng.normal(0.0, sigma, size=filtered.shape)
        codes = np.round(filtered / cfg.lsb_volts)
        saturated_rows = (codes < CODE_MIN) | (codes > CODE_MAX)
        codes = np.clip(codes, CODE_MIN, CODE_MAX).astype(np.int32)

        period = cfg.sample_period_us
        frames = []
        for i in range(n):
            frames.append(QuantizedFrame(
                codes=codes[i].copy(),
                sequence=self._seq,
                timestamp_us=t0_us + self._seq * period,
                saturated=bool(saturated_rows[i].any()),
            ))
            self._seq += 1
        return frames

    def sample(self, values, t0_us: float) -> QuantizedFrame:
        return self.acquire(np.asarray(values, dtype=np.float64)[None, :], t0_us)[0]

    def dequantize(self, codes: np.ndarray) -> np.ndarray:
        """Codes back to input-referred volts."""
        return np.asarray(codes, dtype=np.float64) * self.cfg.lsb_volts


def dequantize(codes: np.ndarray, cfg: ExgAfeConfig) -> np.ndarray:
    return np.asarray(codes, dtype=np.float64) * cfg.lsb_volts


# ---------------------------------------------------------------------------
# Optical pulse sensor
# ---------------------------------------------------------------------------

PPG_SUPPORTED_RATES = (10, 100)
PPG_SUPPLY_CURRENT_A = {10: 480e-6, 100: 1.15e-3}
PPG_LED_SUPPLY_V = 4.2
PPG_ADC_BITS = 19
PPG_CODE_MAX = (1 << PPG_ADC_BITS) - 1


@dataclass
class PpgConfig:
    rate: int = 100
    leds: tuple = (SignalKind.PPG_RED, SignalKind.PPG_IR)
    full_scale: float = 4.0     # reflectance units mapping to full ADC range
    dark_level: int = 2048      # counts with LEDs off

    def __post_init__(self):
        if self.rate not in PPG_SUPPORTED_RATES:
            raise ValueError(f"PPG rate {self.rate} not in {PPG_SUPPORTED_RATES}")
        if not self.leds:
            raise ValueError("at least one LED must be enabled")
        for led in self.leds:
            if led not in (SignalKind.PPG_RED, SignalKind.PPG_IR):
                raise ValueError(f"{led} is not an LED channel")

    @property
    def supply_power_mw(self) -> float:
        return PPG_SUPPLY_CURRENT_A[self.rate] * PPG_LED_SUPPLY_V * 1e3

    @property
    def sample_period_us(self) -> float:
        return 1e6 / self.rate


@dataclass
class PpgFrame:
    codes: np.ndarray          # one 19-bit unsigned code per LED, RED before IR
    sequence: int
    timestamp_us: float
    saturated: bool = False


class PpgSensor:
    """Time-multiplexed LED sampling (fixed RED-then-IR order within one
    sample period) with 19-bit unsigned quantization above a dark level."""

    def __init__(self, cfg: PpgConfig):
        self.cfg = cfg
        self._seq = 0

    def reset(self) -> None:
        self._seq = 0

    def sample(self, values_by_led: dict, t0_us: float) -> PpgFrame:
        order = sorted(self.cfg.leds, key=lambda k: (k is not SignalKind.PPG_RED))
        codes = np.zeros(len(order), dtype=np.int64)
        saturated = False
        for i, led in enumerate(order):
            v = float(values_by_led[led])
            code = self.cfg.dark_level + int(round(v / self.cfg.full_scale * PPG_CODE_MAX))
            if code < 0 or code > PPG_CODE_MAX:
                saturated = True
            codes[i] = min(max(code, 0), PPG_CODE_MAX)
        frame = PpgFrame(codes=codes, sequence=self._seq,
                         timestamp_us=t0_us + self._seq * self.cfg.sample_period_us,
                         saturated=saturated)
        self._seq += 1
        return frame

    def dequantize(self, codes: np.ndarray) -> np.ndarray:
        return (np.asarray(codes, dtype=np.float64) - self.cfg.dark_level) \
            / PPG_CODE_MAX * self.cfg.full_scale


# ---------------------------------------------------------------------------
# Wake events and contact quality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TapEvent:
    time_us: float


def imu_double_tap(schedule_us) -> list[TapEvent]:
    """Turn a sorted list of simulated times into wake-interrupt events."""
    times = list(schedule_us)
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("tap schedule must be sorted ascending")
    return [TapEvent(float(t)) for t in times]


GOOD = "GOOD"
BAD = "BAD"
DEFAULT_IMPEDANCE_THRESHOLD = 50e3


class ImpedanceChecker:
    """Synthetic electrode-skin contact check: returns the configured
    impedance per channel and a quality flag against a threshold."""

    def __init__(self, active_channels: int, impedances_ohm=None,
                 threshold_ohm: float = DEFAULT_IMPEDANCE_THRESHOLD):
        self.active_channels = active_channels
        self.threshold_ohm = threshold_ohm
        self._table = dict(impedances_ohm or {})

    def set_impedance(self, channel: int, ohms: float) -> None:
        self._table[channel] = ohms

    def check(self, channel: int):
        if not 0 <= channel < self.active_channels:
            raise ValueError(f"channel {channel} is not active")
        ohms = self._table.get(channel, 10e3)
        flag = GOOD if ohms < self.threshold_ohm else BAD
        return ohms, flag


# ---------------------------------------------------------------------------
# AFE power calibration
# ---------------------------------------------------------------------------

# Full-system defaults: analog-domain power with all 8 channels at each rate,
# high-resolution mode. Back-computed so that system-level streaming/edge
# totals land on their calibration targets at 1 kSPS; other rates follow a
# plausible monotone profile.
EXG_STANDBY_MW = 0.5
_RATE_FACTOR = {250: 0.85, 500: 0.92, 1000: 1.0, 2000: 1.12, 4000: 1.30,
                8000: 1.55, 16000: 1.90, 32000: 2.40}
EXG_FULL_POWER_MW = 13.53

DEFAULT_EXG_POWER_TABLE = {}
for _rate, _f in _RATE_FACTOR.items():
    DEFAULT_EXG_POWER_TABLE[(8, _rate, AfeMode.HIGH_RESOLUTION)] = EXG_FULL_POWER_MW * _f
    DEFAULT_EXG_POWER_TABLE[(8, _rate, AfeMode.LOW_POWER)] = EXG_FULL_POWER_MW * _f * 0.8


def load_power_table(path) -> dict:
    """Parse a plain-text calibration table: lines of
    ``channels,rate,mode = milliwatts`` (# starts a comment)."""
    table = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                key, value = line.split("=")
                ch_s, rate_s, mode_s = [p.strip() for p in key.split(",")]
                table[(int(ch_s), int(rate_s), AfeMode[mode_s])] = float(value)
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad calibration line: {line!r}") from exc
    return table


def exg_power(cfg: ExgAfeConfig, table: dict | None = None) -> float:
    """Analog-domain power (mW) for a configuration. Exact table entries win;
    otherwise the 8-channel entry at the configured rate is scaled linearly
    in channel count above the standby floor."""
    table = DEFAULT_EXG_POWER_TABLE if table is None else table
    key = (cfg.active_channels, cfg.data_rate, cfg.mode)
    if key in table:
        return table[key]
    full = table.get((8, cfg.data_rate, cfg.mode))
    if full is None:
        raise KeyError(f"no calibration entry for rate {cfg.data_rate}, mode {cfg.mode}")
    return EXG_STANDBY_MW + (full - EXG_STANDBY_MW) * cfg.active_channels / 8.0
