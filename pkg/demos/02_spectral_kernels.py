#!/usr/bin/env python3
"""The single-precision FFT path and what is built on it: spectra, averaged
power spectra, spectrograms, and stimulus bin powers.

Run:  python demos/02_spectral_kernels.py
"""

import numpy as np

from wearsim import dsp
from wearsim.signals import EyeState, gen_alpha_transition

fs = 1000

# A pure tone exactly on bin 8 of a 1024-point transform.
t = np.arange(1024) / fs
x = np.sin(2 * np.pi * 7.8125 * t).astype(np.float32)
spec = dsp.rfft(x, fs)
k = int(np.argmax(np.abs(spec.bins)))
print(f"tone at 7.8125 Hz lands in bin {k} ({spec.freqs[k]:.4f} Hz)")

back = dsp.irfft(spec)
print(f"inverse transform reconstruction error: "
      f"{np.max(np.abs(back - x)):.2e} (float32 path)")

# Stimulus bin powers: fundamental + 2nd/3rd harmonic per candidate frequency.
report = dsp.ssvep_bin_power(spec, (1.0, 3.125, 7.8125, 10.6125))
for f, p in zip(report.stim_freqs, report.powers[0]):
    print(f"  candidate {f:8.4f} Hz -> harmonic-bin power {p:10.1f}")
print(f"classified: {dsp.classify_ssvep(report)} Hz")

# Spectrogram of a closed->open transition: the 8-12 Hz ridge collapses.
trace = gen_alpha_transition(20, 20, fs, seed=3)
grid = dsp.spectrogram(trace, window=1024, overlap=768)
band = grid.band_power_per_column(8, 12)
print(f"\nspectrogram: {grid.power.shape[0]} columns, hop {grid.hop} samples")
print(f"band power, closed half: {band[grid.times < 18].mean():.3e}")
print(f"band power, open half:   {band[grid.times > 22].mean():.3e}")
