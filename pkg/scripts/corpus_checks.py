"""Bounded liveness, half-duplex and monitor-soundness checks over the corpus.

Also runs the three deliberately broken protocols shipped with the corpus so that each
check is seen failing once, with its witness.
"""

import argparse
import time

from sessmon.monitor import Unmonitorable, synthesize_automaton
from sessmon.network import (
    ExplorationBounds, check_half_duplex, check_output_live, explore_network, instrument, internal_bisim,
    network_of_protocol,
)
from sessmon.protocol import CORPUS, load_protocol

EXTRA = ("bad_message", "bad_message_live", "ping_pong", "unmonitorable")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--queue-bound", type=int, default=2)
    args = ap.parse_args()
    bounds = ExplorationBounds(max_queue_len=args.queue_bound)

    print(f"{'protocol':15} {'states':>7} {'live':>5} {'hd':>5} {'bisim':>5}  monitor states per role")
    for name in CORPUS + EXTRA:
        t0 = time.time()
        proto = load_protocol(name)
        autos = {r: synthesize_automaton(t) for r, t in proto.roles.items()}
        sizes = " ".join(f"{r}={'-' if isinstance(a, Unmonitorable) else len(a)}" for r, a in autos.items())
        if any(isinstance(a, Unmonitorable) for a in autos.values()):
            print(f"{proto.name:15} {'':>7} {'':>5} {'':>5} {'':>5}  {sizes}  (unmonitorable)")
            continue
        net = network_of_protocol(proto)
        states = len(explore_network(net, bounds))
        verdicts = [check_output_live(net, bounds), check_half_duplex(net, bounds),
                    internal_bisim(net, instrument(net), bounds)]
        flags = " ".join(f"{str(bool(v)):>5}" for v in verdicts)
        print(f"{proto.name:15} {states:7} {flags}  {sizes}  ({time.time() - t0:.1f}s)")
        for v in verdicts:
            if not v:
                print("   ", str(v).replace("\n", "\n    "))


if __name__ == "__main__":
    main()
