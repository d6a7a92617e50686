"""Front-end model tests: quantizer closed forms, filter behavior, noise
calibration, sequence/timestamp bookkeeping, power table."""

import numpy as np
import pytest

from wearsim import dsp
from wearsim.afe import (BAD, CODE_MAX, CODE_MIN, DEFAULT_NOISE_DENSITY, GOOD,
                         AfeMode, ExgAfe, ExgAfeConfig, ImpedanceChecker,
                         PpgConfig, PpgSensor, PPG_CODE_MAX, dequantize,
                         exg_power, imu_double_tap, load_power_table)
from wearsim.signals import AnalogTrace, SignalKind, gen_ppg


def quiet_cfg(**kw):
    kw.setdefault("noise_density", 0.0)
    return ExgAfeConfig(**kw)


def test_zero_input_zero_code():
    afe = ExgAfe(quiet_cfg(), seed=0)
    frames = afe.acquire(np.zeros((10, 8)), 0.0)
    assert all(np.all(f.codes == 0) for f in frames)
    assert not frames[0].saturated


def test_dc_half_full_scale_hits_2_to_22():
    cfg = quiet_cfg(gain=6)
    afe = ExgAfe(cfg, seed=0)
    frames = afe.acquire(np.full((50, 8), cfg.full_scale_volts / 2), 0.0)
    want = 1 << 22
    for f in frames:
        assert np.all(np.abs(f.codes - want) <= want * 2 ** -10)


def test_noise_calibration_integrated_rms():
    cfg = ExgAfeConfig()  # default density
    afe = ExgAfe(cfg, seed=12)
    frames = afe.acquire(np.zeros((30_000, 8)), 0.0)
    codes = np.stack([f.codes for f in frames])
    trace = AnalogTrace(dequantize(codes[:, 0], cfg), 1000.0, SignalKind.EEG)
    rms = dsp.integrated_rms_noise(trace, 0.5, 100.0)
    assert rms == pytest.approx(0.47e-6, rel=0.10)


def test_noise_rms_scales_with_sqrt_bandwidth():
    cfg = ExgAfeConfig(active_channels=1)
    afe = ExgAfe(cfg, seed=4)
    frames = afe.acquire(np.zeros((30_000, 1)), 0.0)
    trace = AnalogTrace(dequantize(np.array([f.codes[0] for f in frames]), cfg),
                        1000.0, SignalKind.EEG)
    narrow = dsp.integrated_rms_noise(trace, 0.5, 25.0)
    wide = dsp.integrated_rms_noise(trace, 0.5, 100.0)
    assert wide / narrow == pytest.approx(np.sqrt(99.5 / 24.5), rel=0.10)


def test_saturation_clamps_and_flags():
    cfg = quiet_cfg(gain=6)
    afe = ExgAfe(cfg, seed=0)
    frames = afe.acquire(np.full((5, 8), 1.0), 0.0)  # way past 0.4 V full scale
    assert frames[-1].saturated
    assert np.all(frames[-1].codes == CODE_MAX)
    frames = ExgAfe(cfg, seed=0).acquire(np.full((5, 8), -1.0), 0.0)
    assert np.all(frames[-1].codes == CODE_MIN)


def test_sequence_gapless_and_timestamps_exact():
    cfg = quiet_cfg(data_rate=32000)
    afe = ExgAfe(cfg, seed=0)
    frames = afe.acquire(np.zeros((100, 8)), 0.0)
    frames += afe.acquire(np.zeros((57, 8)), 0.0)
    seqs = [f.sequence for f in frames]
    assert seqs == list(range(157))
    stamps = np.array([f.timestamp_us for f in frames])
    assert np.all(np.diff(stamps) == 1e6 / 32000)


def test_gain_linearity_doubles_code():
    v = 0.01
    lo = ExgAfe(quiet_cfg(gain=3), seed=0).acquire(np.full((20, 8), v), 0.0)[-1]
    hi = ExgAfe(quiet_cfg(gain=6), seed=0).acquire(np.full((20, 8), v), 0.0)[-1]
    assert np.all(np.abs(hi.codes - 2 * lo.codes) <= 2)


def test_quantize_dequantize_within_one_lsb():
    cfg = quiet_cfg()
    afe = ExgAfe(cfg, seed=0)
    v = 1.2345e-3
    frame = afe.acquire(np.full((100, 8), v), 0.0)[-1]  # settled DC
    back = dequantize(frame.codes, cfg)
    assert np.all(np.abs(back - v) <= cfg.lsb_volts)


def test_config_validation():
    with pytest.raises(ValueError):
        ExgAfeConfig(gain=5)
    with pytest.raises(ValueError):
        ExgAfeConfig(data_rate=3000)
    with pytest.raises(ValueError):
        ExgAfeConfig(active_channels=9)


# -- pulse sensor ---------------------------------------------------------------

def test_ppg_zero_input_dark_level():
    sensor = PpgSensor(PpgConfig())
    frame = sensor.sample({SignalKind.PPG_RED: 0.0, SignalKind.PPG_IR: 0.0}, 0.0)
    assert np.all(frame.codes == sensor.cfg.dark_level)
    assert not frame.saturated


def test_ppg_full_scale_saturates_to_max_code():
    sensor = PpgSensor(PpgConfig())
    frame = sensor.sample({SignalKind.PPG_RED: 4.0, SignalKind.PPG_IR: 5.0}, 0.0)
    assert np.all(frame.codes == PPG_CODE_MAX)
    assert frame.saturated


def test_ppg_red_before_ir_order():
    sensor = PpgSensor(PpgConfig())
    frame = sensor.sample({SignalKind.PPG_RED: 1.0, SignalKind.PPG_IR: 2.0}, 0.0)
    red, ir = sensor.dequantize(frame.codes)
    assert red == pytest.approx(1.0, abs=1e-4)
    assert ir == pytest.approx(2.0, abs=1e-4)


def test_ppg_end_to_end_beat_interval():
    from scipy.signal import find_peaks
    cfg = PpgConfig(rate=100)
    sensor = PpgSensor(cfg)
    trace = gen_ppg(60, 20, 100, SignalKind.PPG_RED, 2)
    codes = []
    for i, v in enumerate(trace.values):
        codes.append(sensor.sample({SignalKind.PPG_RED: v, SignalKind.PPG_IR: v}, 0.0).codes[0])
    digital = AnalogTrace(sensor.dequantize(np.array(codes)), 100.0, SignalKind.PPG_RED)
    filtered = dsp.ppg_filter(digital, mean_window=1.0)
    peaks, _ = find_peaks(filtered.values, distance=50,
                          prominence=0.3 * filtered.values.std())
    intervals = np.diff(peaks) / 100.0
    assert intervals.mean() == pytest.approx(1.0, abs=0.05)


def test_ppg_config_validation():
    with pytest.raises(ValueError):
        PpgConfig(rate=50)
    with pytest.raises(ValueError):
        PpgConfig(leds=())
    assert PpgConfig(rate=10).supply_power_mw == pytest.approx(480e-6 * 4.2 * 1e3)
    assert PpgConfig(rate=100).supply_power_mw == pytest.approx(1.15e-3 * 4.2 * 1e3)


# -- IMU and impedance -----------------------------------------------------------

def test_imu_double_tap_events():
    assert imu_double_tap([]) == []
    events = imu_double_tap([5e6, 12e6])
    assert [e.time_us for e in events] == [5e6, 12e6]
    with pytest.raises(ValueError):
        imu_double_tap([3e6, 1e6])


def test_impedance_check():
    checker = ImpedanceChecker(8, {0: 10e3, 1: 100e3})
    assert checker.check(0) == (10e3, GOOD)
    assert checker.check(1) == (100e3, BAD)
    with pytest.raises(ValueError):
        checker.check(8)
    lax = ImpedanceChecker(8, {1: 100e3}, threshold_ohm=float("inf"))
    assert lax.check(1)[1] == GOOD


# -- power table -------------------------------------------------------------------

def test_exg_power_monotone_and_floor():
    base = ExgAfeConfig(active_channels=0)
    p0 = exg_power(base)
    powers = [exg_power(ExgAfeConfig(active_channels=c)) for c in range(9)]
    assert powers[0] == p0
    assert all(b >= a for a, b in zip(powers, powers[1:]))
    rates = [exg_power(ExgAfeConfig(data_rate=r)) for r in (250, 500, 1000, 2000, 4000)]
    assert all(b >= a for a, b in zip(rates, rates[1:]))


def test_exg_power_default_calibration_point():
    assert exg_power(ExgAfeConfig()) == pytest.approx(13.53)


def test_shipped_calibration_file_matches_defaults():
    from pathlib import Path
    from wearsim.afe import DEFAULT_EXG_POWER_TABLE
    path = Path(__file__).resolve().parent.parent / "calibration" / "exg_power.cfg"
    table = load_power_table(path)
    for key, mw in DEFAULT_EXG_POWER_TABLE.items():
        assert table[key] == pytest.approx(mw, abs=1e-4)


def test_power_table_loader(tmp_path):
    path = tmp_path / "exg.cfg"
    path.write_text(
        "# test table\n"
        "8,1000,HIGH_RESOLUTION = 14.0\n"
        "4,1000,HIGH_RESOLUTION = 8.0   # comment\n"
    )
    table = load_power_table(path)
    assert table[(8, 1000, AfeMode.HIGH_RESOLUTION)] == 14.0
    assert exg_power(ExgAfeConfig(active_channels=4), table) == 8.0
    # channel interpolation against the 8-ch entry
    assert exg_power(ExgAfeConfig(active_channels=2), table) < 14.0
    bad = tmp_path / "bad.cfg"
    bad.write_text("8,1000 = nope\n")
    with pytest.raises(ValueError, match="bad.cfg:1"):
        load_power_table(bad)
