"""Spectral and time-domain kernels shared by the simulated device and the host.

The FFT mirrors the device's single-precision path: an iterative radix-2
complex core plus the half-length packing trick for real input, all in
float32/complex64. Host-side estimators (Welch averaging, integrated noise)
are free to accumulate in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signals import AnalogTrace

ALLOWED_FFT_SIZES = (256, 512, 1024, 2048, 4096)

_bitrev_cache: dict[int, np.ndarray] = {}
_twiddle_cache: dict[tuple, np.ndarray] = {}
_hann_cache: dict[int, np.ndarray] = {}


def _bitrev(n: int) -> np.ndarray:
    if n not in _bitrev_cache:
        bits = n.bit_length() - 1
        idx = np.arange(n)
        rev = np.zeros(n, dtype=np.int64)
        for b in range(bits):
            rev |= ((idx >> b) & 1) << (bits - 1 - b)
        _bitrev_cache[n] = rev
    return _bitrev_cache[n]


def _twiddles(n: int, half: int, sign: float) -> np.ndarray:
    key = (n, half, sign)
    if key not in _twiddle_cache:
        k = np.arange(half)
        _twiddle_cache[key] = np.exp(sign * 2j * np.pi * k / (2 * half)).astype(np.complex64)
    return _twiddle_cache[key]


def hann(n: int) -> np.ndarray:
    """Periodic Hann window (float32), the window used by psd/spectrogram."""
    if n not in _hann_cache:
        _hann_cache[n] = (0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)).astype(np.float32)
    return _hann_cache[n]


def _cfft(a: np.ndarray, inverse: bool = False) -> np.ndarray:
    # Radix-2 DIT over the last axis, vectorized over any leading axes.
    n = a.shape[-1]
    sign = 1.0 if inverse else -1.0
    out = np.ascontiguousarray(a[..., _bitrev(n)])
    half = 1
    while half < n:
        tw = _twiddles(n, half, sign)
        blocks = out.reshape(out.shape[:-1] + (n // (2 * half), 2 * half))
        top = blocks[..., :half]
        bot = blocks[..., half:] * tw
        out = np.concatenate([top + bot, top - bot], axis=-1).reshape(a.shape)
        half *= 2
    return out


@dataclass
class Spectrum:
    """Single-sided spectrum of a real window: bins[k] is the complex amplitude
    at frequency k*fs/n, k = 0..n/2."""

    bins: np.ndarray
    fs: float
    n: int

    def __post_init__(self):
        if self.n not in ALLOWED_FFT_SIZES:
            raise ValueError(f"FFT size {self.n} not supported (need one of {ALLOWED_FFT_SIZES})")
        if self.bins.shape[-1] != self.n // 2 + 1:
            raise ValueError("spectrum length must be n/2+1")

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.n // 2 + 1) * (self.fs / self.n)

    def nearest_bin(self, freq: float) -> int:
        return int(round(freq * self.n / self.fs))


def rfft_array(x: np.ndarray) -> np.ndarray:
    """Real FFT of float32 input over the last axis; returns complex64 of
    length N/2+1. Batched: leading axes are independent channels."""
    n = x.shape[-1]
    if n & (n - 1) or n not in ALLOWED_FFT_SIZES:
        raise ValueError(f"window length {n} must be a power of two in {ALLOWED_FFT_SIZES}")
    h = n // 2
    x = np.asarray(x, dtype=np.float32)
    z = (x[..., 0::2] + 1j * x[..., 1::2]).astype(np.complex64)
    Z = _cfft(z)
    Zr = np.conj(Z[..., (-np.arange(h)) % h])
    even = 0.5 * (Z + Zr)
    odd = -0.5j * (Z - Zr)
    w = np.exp(-2j * np.pi * np.arange(h) / n).astype(np.complex64)
    X = np.empty(x.shape[:-1] + (h + 1,), dtype=np.complex64)
    X[..., :h] = even + w * odd
    X[..., h] = (Z[..., 0].real - Z[..., 0].imag).astype(np.float32)
    return X


def rfft(window: np.ndarray, fs: float = 1.0) -> Spectrum:
    """Forward real FFT of one window, as the device computes it per channel."""
    values = np.asarray(window, dtype=np.float32)
    if values.ndim != 1:
        raise ValueError("rfft expects a single 1-D window; use rfft_array for batches")
    return Spectrum(bins=rfft_array(values), fs=fs, n=values.shape[0])


def irfft_array(X: np.ndarray, n: int) -> np.ndarray:
    """Inverse of rfft_array; reconstructs the float32 time window."""
    h = n // 2
    Xk = X[..., :h].astype(np.complex64)
    Xr = np.conj(X[..., h:0:-1]).astype(np.complex64)
    w = np.exp(2j * np.pi * np.arange(h) / n).astype(np.complex64)
    even = 0.5 * (Xk + Xr)
    odd = 0.5 * (Xk - Xr) * w
    z = _cfft(even + 1j * odd, inverse=True) / np.float32(h)
    out = np.empty(X.shape[:-1] + (n,), dtype=np.float32)
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def irfft(spectrum: Spectrum) -> np.ndarray:
    return irfft_array(spectrum.bins, spectrum.n)


# ---------------------------------------------------------------------------
# Averaged spectra
# ---------------------------------------------------------------------------

@dataclass
class Psd:
    """Welch-style averaged power spectrum.

    Convention: power[k] = mean over segments of |rfft(hann * x)|^2 / (n * fs).
    This is not unit-normalized spectral density; integrated_rms_noise applies
    the window-energy and one-sidedness corrections when physical units matter.
    """

    freqs: np.ndarray
    power: np.ndarray
    fs: float
    window: int
    overlap: int
    segments: int

    def band_power(self, f_lo: float, f_hi: float) -> float:
        sel = (self.freqs >= f_lo) & (self.freqs <= f_hi)
        return float(np.sum(self.power[sel]))

    def to_csv(self, path) -> None:
        header = "frequency_hz,power"
        data = np.column_stack([self.freqs, self.power])
        np.savetxt(path, data, delimiter=",", header=header, comments="")


def _segment_starts(n_samples: int, window: int, hop: int) -> np.ndarray:
    count = (n_samples - window) // hop + 1
    return np.arange(count) * hop


def _windowed_power(values: np.ndarray, window: int, overlap: int, fs: float):
    if not 0 <= overlap < window:
        raise ValueError("overlap must satisfy 0 <= overlap < window")
    if len(values) < window:
        raise ValueError(f"trace of {len(values)} samples is shorter than window {window}")
    hop = window - overlap
    starts = _segment_starts(len(values), window, hop)
    w = hann(window)
    segs = np.stack([values[s:s + window] for s in starts]).astype(np.float32)
    spectra = rfft_array(segs * w)
    power = (np.abs(spectra.astype(np.complex128)) ** 2) / (window * fs)
    return power, starts, hop


def psd(trace: AnalogTrace, window: int, overlap: int) -> Psd:
    """Averaged power spectrum of a whole trace (Hann window, overlapping
    segments, mean across segments)."""
    power, starts, _ = _windowed_power(trace.values, window, overlap, trace.sample_rate)
    freqs = np.arange(window // 2 + 1) * (trace.sample_rate / window)
    return Psd(freqs=freqs, power=power.mean(axis=0), fs=trace.sample_rate,
               window=window, overlap=overlap, segments=len(starts))


@dataclass
class SpectrogramGrid:
    """Time-resolved power spectrum: power[t, k] over sliding windows."""

    power: np.ndarray
    times: np.ndarray
    freqs: np.ndarray
    fs: float
    window: int
    overlap: int

    @property
    def hop(self) -> int:
        return self.window - self.overlap

    def band_power_per_column(self, f_lo: float, f_hi: float) -> np.ndarray:
        sel = (self.freqs >= f_lo) & (self.freqs <= f_hi)
        return self.power[:, sel].sum(axis=1)

    def to_csv(self, path) -> None:
        header = "time_s," + ",".join(f"{f:.6g}" for f in self.freqs)
        data = np.column_stack([self.times, self.power])
        np.savetxt(path, data, delimiter=",", header=header, comments="")


def spectrogram(trace: AnalogTrace, window: int = 1024, overlap: int = 768) -> SpectrogramGrid:
    """Sliding-window power spectrum; each row equals psd() of that window."""
    power, starts, hop = _windowed_power(trace.values, window, overlap, trace.sample_rate)
    freqs = np.arange(window // 2 + 1) * (trace.sample_rate / window)
    times = starts / trace.sample_rate
    return SpectrogramGrid(power=power, times=times, freqs=freqs,
                           fs=trace.sample_rate, window=window, overlap=overlap)


# ---------------------------------------------------------------------------
# Stimulus-locked bin powers
# ---------------------------------------------------------------------------

@dataclass
class SsvepBinReport:
    """Per-channel power at each stimulation frequency, summed over the
    fundamental and the 2nd/3rd harmonic bins, plus the single-value-per-
    channel summary that the compact link payload carries."""

    stim_freqs: tuple
    powers: np.ndarray               # (n_channels, n_freqs) float32
    summary: np.ndarray              # (n_channels,) float32
    skipped_harmonics: tuple = ()    # (freq, harmonic) pairs above Nyquist
    harmonic_powers: np.ndarray | None = None  # (n_channels, n_freqs, 3)

    @property
    def n_channels(self) -> int:
        return self.powers.shape[0]

    @staticmethod
    def stack(reports: list["SsvepBinReport"]) -> "SsvepBinReport":
        first = reports[0]
        harm = None
        if all(r.harmonic_powers is not None for r in reports):
            harm = np.vstack([r.harmonic_powers for r in reports])
        return SsvepBinReport(
            stim_freqs=first.stim_freqs,
            powers=np.vstack([r.powers for r in reports]),
            summary=np.concatenate([r.summary for r in reports]),
            skipped_harmonics=first.skipped_harmonics,
            harmonic_powers=harm,
        )

    @staticmethod
    def from_harmonics(stim_freqs, harmonic_powers: np.ndarray) -> "SsvepBinReport":
        """Rebuild a report from per-harmonic powers (the extended payload)."""
        harm = np.asarray(harmonic_powers, dtype=np.float32)
        powers = harm.sum(axis=2)
        summary = powers[np.arange(powers.shape[0]), powers.argmax(axis=1)]
        return SsvepBinReport(stim_freqs=tuple(float(f) for f in stim_freqs),
                              powers=powers, summary=summary, harmonic_powers=harm)


N_HARMONICS = 3


def ssvep_bin_power(spectrum: Spectrum, stim_freqs, include_adjacent: bool = False) -> SsvepBinReport:
    """Power at each candidate stimulation frequency for one channel.

    Uses the single nearest FFT bin for the fundamental and each harmonic
    (optionally +-1 bin when include_adjacent is set). Harmonics at or above
    Nyquist are skipped and reported.
    """
    stim_freqs = tuple(float(f) for f in stim_freqs)
    nyquist = spectrum.fs / 2
    if any(f >= nyquist for f in stim_freqs):
        raise ValueError("stimulation frequency at or above Nyquist")
    mag2 = (np.abs(spectrum.bins) ** 2).astype(np.float32)
    n_bins = len(mag2)
    harm = np.zeros((1, len(stim_freqs), N_HARMONICS), dtype=np.float32)
    skipped = []
    for i, f in enumerate(stim_freqs):
        for h in range(1, N_HARMONICS + 1):
            fh = f * h
            if fh >= nyquist:
                skipped.append((f, h))
                continue
            k = spectrum.nearest_bin(fh)
            lo = max(0, k - 1) if include_adjacent else k
            hi = min(n_bins - 1, k + 1) if include_adjacent else k
            harm[0, i, h - 1] = mag2[lo:hi + 1].sum(dtype=np.float32)
    powers = harm.sum(axis=2)
    summary = np.array([powers[0, int(np.argmax(powers[0]))]], dtype=np.float32)
    return SsvepBinReport(stim_freqs=stim_freqs, powers=powers, summary=summary,
                          skipped_harmonics=tuple(skipped), harmonic_powers=harm)


def classify_ssvep(report: SsvepBinReport) -> float:
    """Argmax stimulation frequency over summed harmonic powers (all channels
    pooled); ties resolve toward the lower frequency."""
    if report.powers.shape[1] < 1:
        raise ValueError("report carries no stimulus entries")
    totals = report.powers.sum(axis=0, dtype=np.float64)
    best = totals.max()
    candidates = [f for f, t in zip(report.stim_freqs, totals) if t == best]
    return min(candidates)


# ---------------------------------------------------------------------------
# PPG conditioning and noise integration
# ---------------------------------------------------------------------------

def _odd_length(n: int) -> int:
    return n if n % 2 == 1 else n + 1


def ppg_filter(trace: AnalogTrace, mean_window: float = 1.0, gauss_window: float = 0.1) -> AnalogTrace:
    """Detrend by centered moving-mean subtraction, then smooth with a
    centered Gaussian kernel spanning gauss_window seconds."""
    from scipy.ndimage import uniform_filter1d

    fs = trace.sample_rate
    x = trace.values.astype(np.float64)
    mean_len = int(round(mean_window * fs))
    if mean_len > len(x):
        raise ValueError("moving-mean window longer than trace")
    gauss_len = _odd_length(int(round(gauss_window * fs)))
    if gauss_len < 1:
        raise ValueError("gaussian window shorter than one sample")

    detrended = x - uniform_filter1d(x, size=mean_len, mode="reflect")
    half = gauss_len // 2
    t = np.arange(-half, half + 1)
    sigma = max(gauss_len / 6.0, 1e-9)
    kernel = np.exp(-0.5 * (t / sigma) ** 2)
    kernel /= kernel.sum()
    smoothed = np.convolve(detrended, kernel, mode="same")
    return AnalogTrace(values=smoothed, sample_rate=fs, kind=trace.kind)


def integrated_rms_noise(trace: AnalogTrace, f_lo: float = 0.5, f_hi: float = 100.0) -> float:
    """RMS amplitude of the trace restricted to [f_lo, f_hi], from the
    integral of a properly unit-normalized one-sided spectral density."""
    fs = trace.sample_rate
    if f_lo <= 0 or f_hi > fs / 2:
        raise ValueError("band must lie within (0, Nyquist]")
    if trace.duration < 2.0 / f_lo:
        raise ValueError("trace too short to resolve f_lo")
    n = max(s for s in ALLOWED_FFT_SIZES if s <= min(len(trace.values), ALLOWED_FFT_SIZES[-1]))
    estimate = psd(trace, window=n, overlap=n // 2)
    w = hann(n).astype(np.float64)
    # Undo the |X|^2/(n*fs) convention: density = power * mu * n / sum(w^2),
    # mu = 2 for interior bins (one-sided), 1 at DC and Nyquist.
    mu = np.full(n // 2 + 1, 2.0)
    mu[0] = mu[-1] = 1.0
    density = estimate.power * mu * n / np.sum(w ** 2)
    df = fs / n
    sel = (estimate.freqs >= f_lo) & (estimate.freqs <= f_hi)
    return float(np.sqrt(np.sum(density[sel]) * df))
