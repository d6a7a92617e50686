"""Spectral kernel tests against independent oracles (naive DFT, closed-form
windowed-sine power, Parseval)."""

import numpy as np
import pytest

from wearsim import dsp
from wearsim.signals import AnalogTrace, SignalKind


def naive_rdft(x):
    """O(N^2) reference DFT of real input, float64, bins 0..N/2."""
    n = len(x)
    k = np.arange(n // 2 + 1)
    W = np.exp(-2j * np.pi * np.outer(k, np.arange(n)) / n)
    return W @ np.asarray(x, dtype=np.float64)


def test_rfft_dc_concentrates_in_bin0():
    n = 1024
    c = 0.73
    spec = dsp.rfft(np.full(n, c, dtype=np.float32), fs=1000)
    assert abs(spec.bins[0] - c * n) <= 1e-6 * n
    assert np.max(np.abs(spec.bins[1:])) <= 1e-6 * n


def test_rfft_on_bin_sine_energy():
    n = 1024
    k0 = 37
    t = np.arange(n)
    x = np.sin(2 * np.pi * k0 * t / n).astype(np.float32)
    spec = dsp.rfft(x, fs=1000)
    mags = np.abs(spec.bins)
    assert np.argmax(mags) == k0
    # everything but the tone bin is numerical dust
    rest = np.delete(mags, k0)
    assert rest.max() < 1e-3 * mags[k0]


@pytest.mark.parametrize("n", [256, 1024])
def test_rfft_matches_naive_dft(n):
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(20):
        x = rng.standard_normal(n).astype(np.float32)
        got = dsp.rfft(x, fs=1.0).bins
        ref = naive_rdft(x)
        worst = max(worst, np.max(np.abs(got - ref)) / np.max(np.abs(ref)))
    assert worst <= 1e-5


def test_rfft_rejects_bad_lengths():
    with pytest.raises(ValueError):
        dsp.rfft(np.zeros(1000), fs=1000)
    with pytest.raises(ValueError):
        dsp.rfft(np.zeros(8192), fs=1000)  # power of two but unsupported size


@pytest.mark.parametrize("n", [256, 512, 1024, 2048, 4096])
def test_roundtrip_and_parseval(n):
    rng = np.random.default_rng(n)
    x = rng.standard_normal(n).astype(np.float32)
    spec = dsp.rfft(x, fs=1.0)
    back = dsp.irfft(spec)
    assert np.max(np.abs(back - x)) <= 1e-5 * np.max(np.abs(x))
    mag2 = np.abs(spec.bins.astype(np.complex128)) ** 2
    e_freq = (mag2[0] + mag2[-1] + 2 * mag2[1:-1].sum()) / n
    e_time = np.sum(x.astype(np.float64) ** 2)
    assert abs(e_freq - e_time) / e_time <= 1e-6


def test_batched_rfft_bitwise_equals_per_channel():
    # Channel batching must not change results: same butterflies, same order.
    rng = np.random.default_rng(7)
    block = rng.standard_normal((8, 1024)).astype(np.float32)
    batched = dsp.rfft_array(block)
    for ch in range(8):
        single = dsp.rfft_array(block[ch])
        assert np.array_equal(batched[ch], single)


def test_rfft_linearity():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(1024).astype(np.float32)
    y = rng.standard_normal(1024).astype(np.float32)
    a, b = 1.7, -0.4
    lhs = dsp.rfft((a * x + b * y).astype(np.float32), fs=1.0).bins
    rhs = a * dsp.rfft(x, fs=1.0).bins + b * dsp.rfft(y, fs=1.0).bins
    scale = np.max(np.abs(rhs))
    assert np.max(np.abs(lhs - rhs)) <= 1e-5 * scale


# -- averaged spectra ---------------------------------------------------------

def _sine_trace(freq, fs, duration, amp=1.0, seed=None):
    n = int(duration * fs)
    t = np.arange(n) / fs
    return AnalogTrace(amp * np.sin(2 * np.pi * freq * t), fs, SignalKind.EEG)


def test_psd_peak_matches_hann_closed_form():
    # On-bin sine of amplitude A through the documented convention:
    # peak bin power = A^2 * N / (16 * fs).
    fs, n = 1000.0, 1024
    k0 = 64
    freq = k0 * fs / n
    amp = 3.2e-5
    trace = _sine_trace(freq, fs, 16.384, amp=amp)
    est = dsp.psd(trace, window=n, overlap=n // 2)
    expected = amp ** 2 * n / (16 * fs)
    assert est.power[k0] == pytest.approx(expected, rel=0.01)


def test_psd_white_noise_flat_within_3db():
    rng = np.random.default_rng(0)
    trace = AnalogTrace(rng.standard_normal(120_000), 1000.0, SignalKind.EEG)
    est = dsp.psd(trace, window=1024, overlap=512)
    sel = (est.freqs >= 1) & (est.freqs <= 100)
    band = est.power[sel]
    ratio_db = 10 * np.log10(band.max() / band.min())
    assert ratio_db < 3.0


def test_psd_segment_count_and_short_trace_error():
    trace = AnalogTrace(np.zeros(4096), 1000.0, SignalKind.EEG)
    est = dsp.psd(trace, window=1024, overlap=768)
    assert est.segments == (4096 - 1024) // 256 + 1
    with pytest.raises(ValueError):
        dsp.psd(AnalogTrace(np.zeros(512), 1000.0, SignalKind.EEG), 1024, 768)


def test_psd_scales_with_square_of_amplitude():
    t1 = _sine_trace(50, 1000, 8)
    t2 = AnalogTrace(3.0 * t1.values, 1000.0, SignalKind.EEG)
    p1 = dsp.psd(t1, 1024, 512)
    p2 = dsp.psd(t2, 1024, 512)
    sel = p1.power > p1.power.max() * 1e-6
    assert np.allclose(p2.power[sel] / p1.power[sel], 9.0, rtol=1e-3)


def test_spectrogram_column_count_for_60s_at_1k():
    trace = AnalogTrace(np.zeros(60_000), 1000.0, SignalKind.EEG)
    grid = dsp.spectrogram(trace, window=1024, overlap=768)
    assert grid.hop == 256
    assert grid.power.shape == ((60_000 - 1024) // 256 + 1, 513)
    assert grid.power.shape[0] == 231


def test_spectrogram_stationary_tone_stays_in_one_bin():
    trace = _sine_trace(125, 1000, 10)
    grid = dsp.spectrogram(trace)
    peaks = grid.power.argmax(axis=1)
    assert np.all(peaks == peaks[0])
    assert peaks[0] == 128  # 125 Hz at 1000/1024 spacing


def test_spectrogram_rows_equal_single_window_psd():
    rng = np.random.default_rng(5)
    trace = AnalogTrace(rng.standard_normal(4096), 1000.0, SignalKind.EEG)
    grid = dsp.spectrogram(trace, 1024, 768)
    for row, start in [(0, 0), (3, 3 * 256)]:
        window = AnalogTrace(trace.values[start:start + 1024], 1000.0, SignalKind.EEG)
        single = dsp.psd(window, 1024, 0)
        assert np.allclose(grid.power[row], single.power, rtol=1e-12)


# -- stimulus bin powers --------------------------------------------------------

STIM = (1.0, 3.125, 7.8125, 10.6125)


def test_ssvep_bin_power_on_bin_tone():
    fs, n = 1000.0, 1024
    t = np.arange(n) / fs
    x = np.sin(2 * np.pi * 7.8125 * t).astype(np.float32)  # exactly bin 8
    report = dsp.ssvep_bin_power(dsp.rfft(x, fs), STIM)
    assert report.powers.shape == (1, 4)
    assert STIM[int(np.argmax(report.powers[0]))] == 7.8125
    assert report.summary[0] == report.powers[0].max()


def test_ssvep_bin_power_zero_input():
    report = dsp.ssvep_bin_power(dsp.rfft(np.zeros(1024, dtype=np.float32), 1000.0), STIM)
    assert np.all(report.powers == 0)


def test_ssvep_harmonic_above_nyquist_skipped_and_flagged():
    spec = dsp.rfft(np.zeros(256, dtype=np.float32), fs=250.0)  # Nyquist 125
    report = dsp.ssvep_bin_power(spec, (50.0,))
    assert (50.0, 3) in report.skipped_harmonics  # 150 Hz > 125
    with pytest.raises(ValueError):
        dsp.ssvep_bin_power(spec, (130.0,))


def test_classify_argmax_and_tiebreak():
    powers = np.array([[1.0, 9.0, 2.0, 3.0]], dtype=np.float32)
    report = dsp.SsvepBinReport(STIM, powers, np.array([9.0], dtype=np.float32))
    assert dsp.classify_ssvep(report) == 3.125
    equal = dsp.SsvepBinReport(STIM, np.ones((1, 4), dtype=np.float32),
                               np.ones(1, dtype=np.float32))
    assert dsp.classify_ssvep(equal) == 1.0


def test_classify_invariant_under_positive_scaling():
    rng = np.random.default_rng(9)
    t = np.arange(1024) / 1000.0
    x = (np.sin(2 * np.pi * 10.6125 * t) + 0.1 * rng.standard_normal(1024)).astype(np.float32)
    r1 = dsp.ssvep_bin_power(dsp.rfft(x, 1000.0), STIM)
    r2 = dsp.ssvep_bin_power(dsp.rfft(7.5 * x, 1000.0), STIM)
    assert dsp.classify_ssvep(r1) == dsp.classify_ssvep(r2)


def test_report_from_harmonics_roundtrip():
    rng = np.random.default_rng(2)
    harm = rng.uniform(0, 1, size=(8, 4, 3)).astype(np.float32)
    report = dsp.SsvepBinReport.from_harmonics(STIM, harm)
    assert np.allclose(report.powers, harm.sum(axis=2))
    assert report.summary.shape == (8,)


# -- PPG filter and integrated noise --------------------------------------------

def test_ppg_filter_constant_gives_zero():
    trace = AnalogTrace(np.full(1000, 2.5), 100.0, SignalKind.PPG_RED)
    out = dsp.ppg_filter(trace, mean_window=1.0)
    assert np.max(np.abs(out.values)) < 1e-9


def test_ppg_filter_contracts_white_noise_variance():
    rng = np.random.default_rng(3)
    trace = AnalogTrace(rng.standard_normal(2000), 100.0, SignalKind.PPG_RED)
    out = dsp.ppg_filter(trace, mean_window=1.0)
    assert out.values.var() < trace.values.var()


def test_ppg_filter_window_longer_than_trace_errors():
    trace = AnalogTrace(np.zeros(50), 100.0, SignalKind.PPG_RED)
    with pytest.raises(ValueError):
        dsp.ppg_filter(trace, mean_window=1.0)


def test_integrated_rms_recovers_white_noise_sigma():
    rng = np.random.default_rng(11)
    sigma = 3.3e-6
    fs = 1000.0
    trace = AnalogTrace(rng.normal(0, sigma, 60_000), fs, SignalKind.EEG)
    rms = dsp.integrated_rms_noise(trace, f_lo=0.5, f_hi=fs / 2)
    assert rms == pytest.approx(sigma, rel=0.05)


def test_integrated_rms_zero_trace_and_band_checks():
    trace = AnalogTrace(np.zeros(10_000), 1000.0, SignalKind.EEG)
    assert dsp.integrated_rms_noise(trace) == 0.0
    with pytest.raises(ValueError):
        dsp.integrated_rms_noise(trace, f_lo=0.5, f_hi=600.0)
    with pytest.raises(ValueError):
        dsp.integrated_rms_noise(AnalogTrace(np.zeros(1000), 1000.0, SignalKind.EEG), f_lo=0.5)
