"""Synthetic analog-domain biosignal sources.

Everything downstream (AFE, device, link, host analyses) is exercised against
these generators, so each one is deterministic in (parameters, seed) and
calibrated to the amplitude/spectral targets the rest of the system asserts.
"""

from __future__ import annotations

import csv
import enum
import struct
from dataclasses import dataclass, field

import numpy as np


class SignalKind(enum.IntEnum):
    EEG = 0
    PPG_RED = 1
    PPG_IR = 2


class EyeState(enum.Enum):
    EYES_OPEN = "open"
    EYES_CLOSED = "closed"


# Calibrated amplitude targets for the alpha-wave paradigm (volts peak-to-peak).
ALPHA_CENTER_HZ = 10.0
ALPHA_PP_OPEN = 13e-6
ALPHA_PP_CLOSED = 37e-6

# Nominal DC reflectance level per LED; IR runs at a larger DC than red.
PPG_DC_LEVEL = {SignalKind.PPG_RED: 1.0, SignalKind.PPG_IR: 1.8}

TRACE_MAGIC = b"BGTR"
_TRACE_HEADER = struct.Struct("<4sB3xd")  # magic, kind, pad, sample rate


@dataclass
class AnalogTrace:
    """A uniformly sampled analog signal: volts for EEG, normalized
    reflectance for PPG."""

    values: np.ndarray
    sample_rate: float
    kind: SignalKind = SignalKind.EEG

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("trace values must be 1-D")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValueError("trace contains non-finite values")

    @property
    def duration(self) -> float:
        return len(self.values) / self.sample_rate

    def sample_at(self, index: int) -> float:
        return float(self.values[index])

    def segment(self, t0: float, t1: float) -> "AnalogTrace":
        i0 = int(round(t0 * self.sample_rate))
        i1 = int(round(t1 * self.sample_rate))
        return AnalogTrace(self.values[i0:i1].copy(), self.sample_rate, self.kind)

    # -- trace files -------------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "fs"])
            writer.writerow([self.kind.name, repr(self.sample_rate)])
            for v in self.values:
                writer.writerow([repr(float(v))])

    @staticmethod
    def from_csv(path) -> "AnalogTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["kind", "fs"]:
                raise ValueError(f"unrecognized trace CSV header: {header}")
            kind_name, fs = next(reader)
            values = [float(row[0]) for row in reader if row]
        return AnalogTrace(np.array(values), float(fs), SignalKind[kind_name])

    def to_binary(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_TRACE_HEADER.pack(TRACE_MAGIC, int(self.kind), float(self.sample_rate)))
            fh.write(self.values.astype("<f4").tobytes())

    @staticmethod
    def from_binary(path) -> "AnalogTrace":
        with open(path, "rb") as fh:
            raw = fh.read(_TRACE_HEADER.size)
            magic, kind, fs = _TRACE_HEADER.unpack(raw)
            if magic != TRACE_MAGIC:
                raise ValueError("bad trace file magic")
            values = np.frombuffer(fh.read(), dtype="<f4").astype(np.float64)
        return AnalogTrace(values, fs, SignalKind(kind))


@dataclass
class SsvepStimulus:
    """Flicker-stimulation protocol: each frequency is presented
    `repetitions` times in seeded-random order, every trial followed by a
    rest interval."""

    frequencies: tuple = (1.0, 3.125, 7.8125, 10.6125)
    trial_duration: float = 25.0
    rest_duration: float = 10.0
    repetitions: int = 3

    def __post_init__(self):
        if any(f <= 0 for f in self.frequencies):
            raise ValueError("stimulation frequencies must be positive")
        if self.trial_duration <= 0 or self.rest_duration < 0:
            raise ValueError("durations must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    def schedule(self, seed: int) -> list:
        """Randomized trial order; contains each frequency exactly
        `repetitions` times."""
        rng = np.random.default_rng(seed)
        trials = np.repeat(np.asarray(self.frequencies, dtype=float), self.repetitions)
        return [float(f) for f in rng.permutation(trials)]


@dataclass
class SsvepSegment:
    trace: AnalogTrace
    label: float | None  # stimulation frequency, None for a rest interval


@dataclass
class SsvepSession:
    segments: list
    stimulus: SsvepStimulus
    snr_db: float
    low_snr_warning: bool = False

    @property
    def trials(self) -> list:
        return [s for s in self.segments if s.label is not None]

    def concatenate(self):
        """Full-session trace plus (t_start, t_end, label) trial windows in
        session-relative seconds."""
        fs = self.segments[0].trace.sample_rate
        values = np.concatenate([s.trace.values for s in self.segments])
        windows = []
        t = 0.0
        for seg in self.segments:
            d = seg.trace.duration
            if seg.label is not None:
                windows.append((t, t + d, seg.label))
            t += d
        return AnalogTrace(values, fs, SignalKind.EEG), windows


# ---------------------------------------------------------------------------
# Background noise
# ---------------------------------------------------------------------------

def _background(n: int, fs: float, rng: np.random.Generator,
                alpha: float = 1.0, pink_fraction: float = 0.8) -> np.ndarray:
    """Unit-RMS mixture of 1/f^alpha and white noise, exactly zero-mean."""
    if n == 0:
        return np.zeros(0)
    white = rng.standard_normal(n)
    if n < 8:
        out = white - white.mean()
        rms = np.sqrt(np.mean(out ** 2)) or 1.0
        return out / rms
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / fs)
    shape = np.zeros_like(f)
    shape[1:] = f[1:] ** (-alpha / 2.0)
    pink = np.fft.irfft(spec * shape, n)
    pink /= np.sqrt(np.mean(pink ** 2))
    white /= np.sqrt(np.mean(white ** 2))
    out = np.sqrt(pink_fraction) * pink + np.sqrt(1.0 - pink_fraction) * white
    out -= out.mean()
    return out / np.sqrt(np.mean(out ** 2))


def _peak_to_peak(x: np.ndarray) -> float:
    return float(x.max() - x.min()) if len(x) else 0.0


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def gen_background(duration: float, fs: float, seed: int, rms: float = 2e-6,
                   kind: SignalKind = SignalKind.EEG) -> AnalogTrace:
    """Plain 1/f-plus-white background at a given RMS (rms=0 gives silence)."""
    if duration < 0 or fs <= 0:
        raise ValueError("invalid duration or sample rate")
    n = int(round(duration * fs))
    if rms == 0:
        return AnalogTrace(np.zeros(n), fs, kind)
    rng = np.random.default_rng(seed)
    return AnalogTrace(_background(n, fs, rng) * rms, fs, kind)


def _check_eeg_args(duration: float, fs: float) -> None:
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if fs < 250:
        raise ValueError("EEG sample rate must be >= 250 Hz")


def gen_alpha_eeg(state: EyeState, duration: float, fs: float, seed: int) -> AnalogTrace:
    """Resting EEG with the 8-12 Hz rhythm present only in the eyes-closed
    state. Peak-to-peak amplitude is calibrated to ~13 uV open / ~37 uV
    closed; the closed-state alpha component carries >= 4x the open-state
    band power."""
    _check_eeg_args(duration, fs)
    n = int(round(duration * fs))
    rng = np.random.default_rng(seed)
    bg = _background(n, fs, rng)
    if n == 0:
        return AnalogTrace(bg, fs, SignalKind.EEG)

    pp_bg = _peak_to_peak(bg) or 1.0
    values = bg * (ALPHA_PP_OPEN / pp_bg)
    if state is EyeState.EYES_CLOSED:
        t = np.arange(n) / fs
        carrier = np.sin(2 * np.pi * ALPHA_CENTER_HZ * t + rng.uniform(0, 2 * np.pi))
        # Slow burst envelope so the rhythm waxes and wanes like real alpha.
        env_noise = np.convolve(rng.standard_normal(n), np.ones(max(int(fs / 2), 1)), mode="same")
        env_noise /= max(np.abs(env_noise).max(), 1e-12)
        envelope = np.clip(1.0 + 0.35 * env_noise, 0.2, None)
        alpha = carrier * envelope
        alpha -= alpha.mean()
        # Two fixed-point passes land the total peak-to-peak on the target.
        gain = (ALPHA_PP_CLOSED - ALPHA_PP_OPEN) / (_peak_to_peak(alpha) or 1.0)
        for _ in range(2):
            total_pp = _peak_to_peak(values + gain * alpha)
            gain *= 1.0 + (ALPHA_PP_CLOSED - total_pp) / max(gain * _peak_to_peak(alpha), 1e-12)
        values = values + gain * alpha
    values -= values.mean()
    return AnalogTrace(values, fs, SignalKind.EEG)


def gen_alpha_transition(closed_duration: float, open_duration: float, fs: float,
                         seed: int) -> AnalogTrace:
    """Closed-then-open session in one continuous trace, for spectrogram
    transition views."""
    closed = gen_alpha_eeg(EyeState.EYES_CLOSED, closed_duration, fs, seed)
    opened = gen_alpha_eeg(EyeState.EYES_OPEN, open_duration, fs, seed + 1)
    return AnalogTrace(np.concatenate([closed.values, opened.values]), fs, SignalKind.EEG)


LOW_SNR_WARNING_DB = -20.0
SSVEP_BACKGROUND_RMS = 2e-6  # volts


def gen_ssvep_session(stimulus: SsvepStimulus, fs: float, snr_db: float, seed: int,
                      harmonic_decay: float = 0.5) -> SsvepSession:
    """Full flicker session: per trial, sinusoids at the stimulation frequency
    plus its 2nd and 3rd harmonics (amplitudes decaying by harmonic_decay per
    step) over 1/f background at the requested SNR; rests are background only.

    SNR convention: total tone power over total background power within a
    trial, in dB.
    """
    if fs < 250:
        raise ValueError("EEG sample rate must be >= 250 Hz")
    schedule = stimulus.schedule(seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB10]))
    n_trial = int(round(stimulus.trial_duration * fs))
    n_rest = int(round(stimulus.rest_duration * fs))
    decays = np.array([harmonic_decay ** h for h in range(3)])
    tone_power_factor = float(np.sum(decays ** 2) / 2.0)

    segments = []
    for freq in schedule:
        bg = _background(n_trial, fs, rng) * SSVEP_BACKGROUND_RMS
        bg_power = float(np.mean(bg ** 2))
        target_power = bg_power * 10.0 ** (snr_db / 10.0)
        base_amp = np.sqrt(target_power / tone_power_factor)
        t = np.arange(n_trial) / fs
        tones = np.zeros(n_trial)
        for h in range(3):
            tones += base_amp * decays[h] * np.sin(2 * np.pi * freq * (h + 1) * t
                                                   + rng.uniform(0, 2 * np.pi))
        values = bg + tones
        values -= values.mean()
        segments.append(SsvepSegment(AnalogTrace(values, fs, SignalKind.EEG), freq))
        if n_rest:
            rest = _background(n_rest, fs, rng) * SSVEP_BACKGROUND_RMS
            rest -= rest.mean()
            segments.append(SsvepSegment(AnalogTrace(rest, fs, SignalKind.EEG), None))
    return SsvepSession(segments=segments, stimulus=stimulus, snr_db=snr_db,
                        low_snr_warning=snr_db < LOW_SNR_WARNING_DB)


def gen_ppg(heart_rate: float, duration: float, fs: float, led: SignalKind,
            seed: int, perfusion: float = 0.02, dc_ratio: float | None = None) -> AnalogTrace:
    """Quasi-periodic reflectance pulse waveform: one systolic peak plus a
    dicrotic bump per cardiac cycle, slow (<0.5 Hz) baseline wander, white
    noise, and an LED-dependent DC level."""
    if not 30 <= heart_rate <= 220:
        raise ValueError("heart_rate must be within 30..220 bpm")
    if led not in (SignalKind.PPG_RED, SignalKind.PPG_IR):
        raise ValueError("led must be PPG_RED or PPG_IR")
    if duration < 0 or fs <= 0:
        raise ValueError("invalid duration or sample rate")
    n = int(round(duration * fs))
    dc = PPG_DC_LEVEL[led] if dc_ratio is None else (
        PPG_DC_LEVEL[SignalKind.PPG_RED] * (dc_ratio if led is SignalKind.PPG_IR else 1.0))
    if n == 0:
        return AnalogTrace(np.zeros(0), fs, led)

    rng = np.random.default_rng(seed)
    t = np.arange(n) / fs
    period = 60.0 / heart_rate
    phase = (t % period) / period
    # Broad systolic wave keeps the cardiac fundamental dominant; the narrow
    # late bump stands in for the dicrotic notch.
    systole = np.exp(-0.5 * ((phase - 0.18) / 0.11) ** 2)
    dicrotic = 0.25 * np.exp(-0.5 * ((phase - 0.42) / 0.07) ** 2)
    pulse = systole + dicrotic

    wander = (0.25 * np.sin(2 * np.pi * 0.2 * t + rng.uniform(0, 2 * np.pi))
              + 0.15 * np.sin(2 * np.pi * 0.37 * t + rng.uniform(0, 2 * np.pi)))
    noise = 0.05 * rng.standard_normal(n)
    ac = pulse + wander + noise
    ac -= ac.mean()
    values = dc + (perfusion * dc) * ac
    return AnalogTrace(values, fs, led)
