"""Run every preset (10 protocols x 3 transports x 2 variants) and print the A/R/T table.

Rows with a calibrated baseline are marked ok/MISMATCH. Writes the CSV next to the table
when --out is given.
"""

import argparse
import time

from sessmon.presets import BASELINES, TRANSPORTS, VARIANTS, preset, preset_names
from sessmon.sim import run_simulation, write_csv


def expected(name, transport, variant):
    b = BASELINES[name]
    if transport == "udp":
        return b.udp_correct if variant == "correct" else b.udp_faulty
    if transport == "tcp-reliable" and variant == "faulty":
        return (b.tcp_faulty_accepted, None)
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="CSV output path")
    args = ap.parse_args()

    reports, mismatches = [], 0
    print(f"{'protocol':10} {'transport':15} {'variant':8} {'A':>6} {'R':>6} {'T':>5}  sessions  check")
    t0 = time.time()
    for name in preset_names():
        for transport in TRANSPORTS:
            for variant in VARIANTS:
                r = run_simulation(preset(name, transport, variant, args.seed))
                reports.append(r)
                want = expected(name, transport, variant)
                mark = ""
                if want is not None:
                    ok = r.accepted == want[0] and (want[1] is None or r.rejected == want[1])
                    mark = "ok" if ok else f"MISMATCH want {want}"
                    mismatches += not ok
                outcome = f"{r.completed}C/{r.stuck}S/{r.closed}X"
                print(f"{name:10} {transport:15} {variant:8} {r.accepted:6} {r.rejected:6} "
                      f"{r.retransmissions:5}  {outcome:9} {mark}")
    print(f"\n{len(reports)} runs in {time.time() - t0:.1f}s, {mismatches} mismatches")
    if args.out:
        write_csv(reports, args.out)
        print(f"wrote {args.out}")
    return 1 if mismatches else 0


if __name__ == "__main__":
    raise SystemExit(main())
