"""Lossy TCP sweep: 1% loss, 1% duplication, up to 100 ms delay, over a range of seeds.

Prints per protocol and variant the mean A/R/T, the session outcomes, and the two
containment properties (no session closed in correct runs, no accepts after a close).
"""

import argparse
import statistics

from sessmon.presets import VARIANTS, preset, preset_names
from sessmon.sim import run_simulation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()

    print(f"{'protocol':10} {'variant':8} {'A':>8} {'R':>8} {'T':>6}  completed  closed  closes  after-close")
    for name in preset_names():
        for variant in VARIANTS:
            runs = [run_simulation(preset(name, "tcp-unreliable", variant, seed)) for seed in range(args.seeds)]
            mean = lambda f: statistics.fmean(f(r) for r in runs)
            done = sum(r.completed for r in runs) / sum(r.sessions for r in runs)
            closed = sum(r.closed for r in runs)
            closes = sum(m["closed"] for r in runs for m in r.per_monitor.values())
            after = sum(r.accepts_after_close for r in runs)
            print(f"{name:10} {variant:8} {mean(lambda r: r.accepted):8.1f} {mean(lambda r: r.rejected):8.1f} "
                  f"{mean(lambda r: r.retransmissions):6.1f}  {done:9.1%}  {closed:6}  {closes:6}  {after:11}")


if __name__ == "__main__":
    main()
