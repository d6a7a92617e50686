#!/usr/bin/env python3
"""Tour of the synthetic signal sources: resting EEG with and without the
8-12 Hz rhythm, a flicker-stimulation trial, and the optical pulse waveform.

Run:  python demos/01_synthetic_signals.py [--plot out.png]
"""

import argparse

import numpy as np

from wearsim import dsp
from wearsim.signals import (EyeState, SignalKind, SsvepStimulus, gen_alpha_eeg,
                             gen_ppg, gen_ssvep_session)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--plot", default=None, help="save a matplotlib figure here")
    args = ap.parse_args()

    fs = 1000
    opened = gen_alpha_eeg(EyeState.EYES_OPEN, 30, fs, seed=0)
    closed = gen_alpha_eeg(EyeState.EYES_CLOSED, 30, fs, seed=0)
    pp = lambda tr: (tr.values.max() - tr.values.min()) * 1e6
    print(f"eyes open:   {pp(opened):5.1f} uVpp")
    print(f"eyes closed: {pp(closed):5.1f} uVpp")
    ratio = (dsp.psd(closed, 1024, 768).band_power(8, 12)
             / dsp.psd(opened, 1024, 768).band_power(8, 12))
    print(f"8-12 Hz band power ratio closed/open: {ratio:.0f}x\n")

    session = gen_ssvep_session(SsvepStimulus(frequencies=(7.8125,), repetitions=1),
                                fs, snr_db=20, seed=1)
    trial = session.trials[0].trace
    est = dsp.psd(trial, 1024, 512)
    top = est.freqs[np.argsort(est.power)[-6:]]
    print(f"flicker trial at 7.8125 Hz; strongest spectral bins near: "
          f"{sorted(round(float(f), 2) for f in top)}\n")

    ppg = gen_ppg(72, 30, 100, SignalKind.PPG_IR, seed=2)
    est = dsp.psd(ppg, 2048, 1024)
    cardiac = (est.freqs > 0.6) & (est.freqs < 3.0)
    f0 = est.freqs[cardiac][np.argmax(est.power[cardiac])]
    print(f"pulse waveform at 72 bpm; spectral fundamental {f0 * 60:.1f} beats/min")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, axes = plt.subplots(3, 1, figsize=(9, 7), tight_layout=True)
        t = np.arange(3000) / fs
        axes[0].plot(t, closed.values[:3000] * 1e6, lw=0.6, label="closed")
        axes[0].plot(t, opened.values[:3000] * 1e6, lw=0.6, label="open")
        axes[0].set(title="resting EEG", ylabel="uV"); axes[0].legend()
        axes[1].semilogy(est.freqs, est.power)
        axes[1].set(title="pulse spectrum", xlabel="Hz", xlim=(0, 10))
        t2 = np.arange(500) / 100
        axes[2].plot(t2, ppg.values[:500])
        axes[2].set(title="pulse waveform", xlabel="s")
        fig.savefig(args.plot, dpi=110)
        print(f"figure saved: {args.plot}")


if __name__ == "__main__":
    main()
