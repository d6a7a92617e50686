#!/usr/bin/env python3
"""Run the checked-in scenarios end to end (source -> AFE -> device -> link
-> host) and summarize what each one demonstrates.

Run:  python demos/05_full_scenarios.py [--out DIR]
Note: the flicker-classification scenario simulates 423 s and takes a
couple of minutes of wall time together with the others.
"""

import argparse
from pathlib import Path

from wearsim.scenario import ScenarioRunner, load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="demo_out")
    ap.add_argument("--skip-ssvep", action="store_true",
                    help="skip the long flicker-classification run")
    args = ap.parse_args()

    names = ["alpha-wave", "ppg-finger", "sleep-wake"]
    if not args.skip_ssvep:
        names.insert(1, "ssvep-edge")

    for name in names:
        result = ScenarioRunner(load_scenario(SCENARIOS / f"{name}.scn"),
                                out_dir=Path(args.out) / name).run()
        log = result.log
        print(f"== {name}")
        print(f"   modes visited: {' -> '.join(m for _, m in log.state_changes)}")
        print(f"   link: {result.link.delivered} delivered, {result.link.dropped} dropped")
        if log.eeg_sample_count:
            print(f"   raw samples logged: {log.eeg_sample_count}")
        if result.trial_results:
            good = sum(r.correct for r in result.trial_results)
            print(f"   classification: {good}/{len(result.trial_results)} trials")
        print(f"   average power: {result.ledger.average_power_mw():.2f} mW")
        for kind, path in result.reports_written.items():
            print(f"   {kind}: {path}")
        print()


if __name__ == "__main__":
    main()
