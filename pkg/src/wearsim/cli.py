"""Command-line front door: run scenarios, compare operating modes, analyze
saved logs, serve live telemetry, and inspect captured packets."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dsp, link as link_mod
from .host import compare_modes, mode_table_csv, mode_table_text
from .scenario import ScenarioError, ScenarioRunner, load_scenario
from .signals import AnalogTrace, SignalKind
from .telemetry import TelemetryServer


def _cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    runner = ScenarioRunner(scenario, out_dir=args.out, trace_path=args.trace)
    result = runner.run()
    print(f"scenario '{scenario.name}' finished: {scenario.duration_s:.1f} s simulated")
    print(f"  mode now: {result.device.mode.value}")
    print(f"  link: emitted={result.link.emitted} delivered={result.link.delivered} "
          f"dropped={result.link.dropped}")
    print(f"  eeg samples logged: {result.log.eeg_sample_count}")
    print(f"  average power: {result.ledger.average_power_mw():.3f} mW")
    if result.deadline_misses:
        print(f"  WARNING: {result.deadline_misses} hop deadline overruns")
    if result.trial_results:
        good = sum(r.correct for r in result.trial_results)
        print(f"  classification: {good}/{len(result.trial_results)} trials correct")
    for name, path in result.reports_written.items():
        print(f"  report {name}: {path}")
    return 0


def _cmd_compare_modes(args) -> int:
    rates = tuple(int(r) for r in args.rates.split(","))
    rows = compare_modes(sample_rates=rates, channels=args.channels)
    print(mode_table_text(rows))
    if args.csv:
        mode_table_csv(rows, args.csv)
        print(f"written: {args.csv}")
    return 0


def _cmd_analyze(args) -> int:
    log_dir = Path(args.log)
    meta = json.loads((log_dir / "meta.json").read_text())
    fs = float(meta.get("sample_rate", 1000))
    samples_path = log_dir / "samples.csv"
    if samples_path.exists() and len(samples_path.read_text().splitlines()) > 1:
        data = np.genfromtxt(samples_path, delimiter=",", skip_header=1)
        if data.size:
            volts = np.atleast_2d(data)[:, 2:]
            trace = AnalogTrace(volts[:, args.channel], fs, SignalKind.EEG)
            print(f"{len(trace.values)} samples, {trace.duration:.2f} s, channel {args.channel}")
            if args.psd and len(trace.values) >= 1024:
                dsp.psd(trace, 1024, 768).to_csv(args.psd)
                print(f"psd written: {args.psd}")
            if args.spectrogram and len(trace.values) >= 1024:
                dsp.spectrogram(trace, 1024, 768).to_csv(args.spectrogram)
                print(f"spectrogram written: {args.spectrogram}")
            if args.rms:
                rms = dsp.integrated_rms_noise(trace)
                print(f"integrated RMS 0.5-100 Hz: {rms * 1e6:.4f} uV")
    ppg_path = log_dir / "ppg.csv"
    if args.beats and ppg_path.exists():
        from scipy.signal import find_peaks
        data = np.genfromtxt(ppg_path, delimiter=",", skip_header=1)
        values = np.atleast_2d(data)[:, 2]
        rate = float(meta.get("ppg_rate", 100))
        trace = AnalogTrace(values, rate, SignalKind.PPG_RED)
        filtered = dsp.ppg_filter(trace, mean_window=1.0)
        peaks, _ = find_peaks(filtered.values, distance=int(0.4 * rate),
                              prominence=0.3 * float(np.std(filtered.values)))
        if len(peaks) > 1:
            intervals = np.diff(peaks) / rate
            print(f"{len(peaks)} beats, mean interval {intervals.mean():.3f} s "
                  f"({60 / intervals.mean():.1f} bpm)")
        else:
            print("no beats found")
    return 0


def _cmd_serve(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    if args.ignore_script:
        scenario.commands = []
    server = TelemetryServer(port=args.port)
    runner = ScenarioRunner(scenario, out_dir=args.out, telemetry=server,
                            speed=args.speed, loop=True)
    server.snapshot_fn = runner.snapshot
    port = server.start()
    print(f"telemetry listening on 127.0.0.1:{port}", flush=True)
    try:
        runner.run_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def _cmd_hexdump(args) -> int:
    raw = Path(args.capture).read_bytes()
    off = 0
    count = 0
    while off + 2 <= len(raw):
        size = int.from_bytes(raw[off:off + 2], "big")
        off += 2
        packet = link_mod.Packet.from_bytes(raw[off:off + size])
        off += size
        print(link_mod.hexdump(packet))
        count += 1
        if args.limit and count >= args.limit:
            break
    print(f"({count} packets)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wearsim",
                                     description="Wearable biosignal platform simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario file")
    p.add_argument("scenario")
    p.add_argument("--out", default=".", help="directory for report outputs")
    p.add_argument("--trace", default=None,
                   help="write a device event trace (time event state) here")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("compare-modes", help="streaming vs edge table")
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--rates", default="250,500,1000,2000,4000")
    p.add_argument("--csv", default=None)
    p.set_defaults(fn=_cmd_compare_modes)

    p = sub.add_parser("analyze", help="analyses over a saved session log")
    p.add_argument("log", help="log directory (with meta.json)")
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--psd", default=None, help="write PSD CSV here")
    p.add_argument("--spectrogram", default=None, help="write spectrogram CSV here")
    p.add_argument("--rms", action="store_true", help="integrated RMS noise 0.5-100 Hz")
    p.add_argument("--beats", action="store_true", help="PPG beat intervals")
    p.set_defaults(fn=_cmd_analyze)

    p = sub.add_parser("serve", help="run a scenario with live telemetry")
    p.add_argument("scenario")
    p.add_argument("--port", type=int, default=9900)
    p.add_argument("--speed", type=float, default=1.0,
                   help="simulated seconds per wall second (0 = unpaced)")
    p.add_argument("--out", default=".")
    p.add_argument("--ignore-script", action="store_true",
                   help="drop the scenario's [commands]; drive via telemetry only")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("hexdump", help="print packets from a capture file")
    p.add_argument("capture")
    p.add_argument("--limit", type=int, default=0)
    p.set_defaults(fn=_cmd_hexdump)

    args = parser.parse_args(argv)
    if getattr(args, "speed", None) == 0:
        args.speed = None
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
