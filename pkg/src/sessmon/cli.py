"""Command-line entry point: check, synth, compose, simulate, verify, corpus."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .monitor import (
    IdMap, MatTable, SynthLimits, Unmonitorable, automaton_text, automaton_to_mat, compose_restrict,
    synthesize_automaton,
)
from .network import (
    ExplorationBounds, StateBoundExceeded, check_half_duplex, check_output_live, instrument,
    internal_bisim, network_of_protocol,
)
from .presets import TRANSPORTS, VARIANTS, preset, preset_names
from .protocol import CORPUS, load_protocol
from .sim import Scenario, run_simulation, write_csv
from .st_core import SessionTypeError


def _emit(text: str, out: str | None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _bounds(args) -> ExplorationBounds:
    return ExplorationBounds(max_queue_len=args.queue_bound, max_states=args.max_states)


def _verdict(v) -> dict:
    if v:
        return {"holds": True}
    return {"holds": False, "reason": v.reason, "witness": [str(l) for l in v.witness]}


def check_protocol_bundle(name: str, bounds: ExplorationBounds, limits: SynthLimits = SynthLimits()) -> dict:
    proto = load_protocol(name)
    net = network_of_protocol(proto)
    res = {"protocol": proto.name, "checks": {}}
    res["checks"]["output_live"] = _verdict(check_output_live(net, bounds))
    res["checks"]["half_duplex"] = _verdict(check_half_duplex(net, bounds))
    synth = {}
    for role in proto.role_names:
        a = synthesize_automaton(proto.roles[role], limits)
        synth[role] = {"holds": True, "states": len(a)} if not isinstance(a, Unmonitorable) else \
            {"holds": False, "reason": a.reason}
    res["checks"]["monitorable"] = {"holds": all(v["holds"] for v in synth.values()), "roles": synth}
    res["ok"] = all(c["holds"] for c in res["checks"].values())
    return res


def _format_checks(res: dict) -> str:
    lines = [f"{res['protocol']}:"]
    for name, c in res["checks"].items():
        lines.append(f"  {name:12} {'holds' if c['holds'] else 'FAILS'}")
        if not c["holds"]:
            if "reason" in c:
                lines.append(f"    {c['reason']}")
            if c.get("witness"):
                lines.append("    witness: " + " ; ".join(c["witness"]))
            for role, r in c.get("roles", {}).items():
                if not r["holds"]:
                    lines.append(f"    {role}: {r['reason']}")
    return "\n".join(lines) + "\n"


def cmd_check(args) -> int:
    try:
        res = check_protocol_bundle(args.protocol, _bounds(args), SynthLimits(max_states=args.max_monitor_states))
    except StateBoundExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    _emit(json.dumps(res, indent=1) + "\n" if args.format == "json" else _format_checks(res), args.out)
    return 0 if res["ok"] else 1


def _synth_role(proto, role: str, limits: SynthLimits):
    if role not in proto.roles:
        raise SystemExit(f"error: {proto.name} has no role {role!r}; roles: {', '.join(proto.role_names)}")
    return synthesize_automaton(proto.roles[role], limits)


def _artifact(a, role, ids: IdMap, fmt: str) -> str:
    mat = automaton_to_mat(a, role, ids)
    if fmt == "json":
        return mat.to_json()
    return automaton_text(a) + "\n" + mat.to_text()


def cmd_synth(args) -> int:
    proto = load_protocol(args.protocol)
    a = _synth_role(proto, args.role[0], SynthLimits(max_states=args.max_monitor_states))
    if isinstance(a, Unmonitorable):
        print(f"unmonitorable: {a.reason}\n  witness: {a.witness}", file=sys.stderr)
        return 1
    ids = IdMap.build(proto.role_names, proto.labels)
    _emit(_artifact(a, args.role[0], ids, args.format), args.out)
    return 0


def cmd_compose(args) -> int:
    if len(args.role) != 2:
        raise SystemExit("error: compose needs exactly two --role options")
    proto = load_protocol(args.protocol)
    limits = SynthLimits(max_states=args.max_monitor_states)
    (p, q) = args.role
    autos = []
    for r in (p, q):
        a = _synth_role(proto, r, limits)
        if isinstance(a, Unmonitorable):
            print(f"unmonitorable role {r}: {a.reason}", file=sys.stderr)
            return 1
        autos.append(a)
    joint = compose_restrict(autos[0], p, autos[1], q)
    ids = IdMap.build(proto.role_names, proto.labels)
    _emit(_artifact(joint, None, ids, args.format), args.out)
    return 0


def cmd_verify(args) -> int:
    proto = load_protocol(args.protocol)
    net = network_of_protocol(proto)
    try:
        if args.drop_row is not None:
            role, _, idx = args.drop_row.partition(":")
            ids = IdMap.build(proto.role_names, proto.labels)
            tables = {r: automaton_to_mat(synthesize_automaton(t), r, ids) for r, t in proto.roles.items()}
            t = tables[role]
            rows = [row for i, row in enumerate(t.rows) if i != int(idx)]
            tables[role] = MatTable(rows, t.initial, ids)
            v = internal_bisim(net, bounds=_bounds(args), tables=tables)
        else:
            v = internal_bisim(net, instrument(net), _bounds(args))
    except StateBoundExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    res = {"protocol": proto.name, "internal_bisim": _verdict(v)}
    if args.format == "json":
        text = json.dumps(res, indent=1) + "\n"
    else:
        text = f"{proto.name}: internal bisimilarity {'holds' if v else 'FAILS'}\n" + ("" if v else str(v) + "\n")
    _emit(text, args.out)
    return 0 if v else 1


def _scenario(args) -> Scenario:
    if args.scenario:
        s = Scenario.from_json(Path(args.scenario).read_text())
        if args.seed is not None:
            s.seed = args.seed
        return s
    if not args.protocol:
        raise SystemExit("error: give --scenario FILE or --protocol NAME")
    return preset(args.protocol, args.transport, args.variant, args.seed or 0, monitored=not args.unmonitored)


def cmd_simulate(args) -> int:
    s = _scenario(args)
    rep = run_simulation(s)
    if args.format == "json":
        text = json.dumps({**rep.csv_row(), "per_monitor": rep.per_monitor}, indent=1) + "\n"
    else:
        text = write_csv([rep])
    _emit(text, args.out)
    if args.log:
        Path(args.log).write_text(rep.event_log())
    return 0


def cmd_corpus(args) -> int:
    if args.action == "list":
        for name in CORPUS:
            p = load_protocol(name)
            print(f"{name:10} {p.name:10} roles={len(p.roles):2} labels={len(p.labels):2} initiator={p.initiator}")
        return 0
    bounds = _bounds(args)
    out = Path(args.out) if args.out else None
    ok = True
    reports = []
    for name in preset_names():
        t0 = time.time()
        res = check_protocol_bundle(name, bounds)
        net = network_of_protocol(load_protocol(name))
        bis = internal_bisim(net, instrument(net), bounds)
        passed = res["ok"] and bool(bis)
        ok &= passed
        print(f"{res['protocol']:10} live={res['checks']['output_live']['holds']} "
              f"half_duplex={res['checks']['half_duplex']['holds']} bisim={bool(bis)} "
              f"monitorable={res['checks']['monitorable']['holds']} ({time.time() - t0:.1f}s)")
        for tr in TRANSPORTS:
            for v in VARIANTS:
                reports.append(run_simulation(preset(name, tr, v, args.seed or 0)))
    csv_text = write_csv(reports)
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sessmon", description="Session-type monitors for network traffic.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, protocol=True):
        if protocol:
            p.add_argument("--protocol", required=True, help="corpus name or path to a .proto file")
        p.add_argument("--queue-bound", type=int, default=2, help="per-sender queue bound for exploration")
        p.add_argument("--max-states", type=int, default=200_000, help="cap on explored network states")
        p.add_argument("--max-monitor-states", type=int, default=10_000, help="cap on monitor states per role")
        p.add_argument("--format", choices=("text", "json", "csv"), default="text")
        p.add_argument("--out", help="write output here instead of stdout")

    p = sub.add_parser("check", help="liveness, half-duplex and monitorability of a protocol")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("synth", help="monitor automaton and match-action table for one role")
    common(p)
    p.add_argument("--role", action="append", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compose", help="joint monitor for two roles behind one switch")
    common(p)
    p.add_argument("--role", action="append", required=True)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("verify", help="bisimilarity of a protocol network and its monitored twin")
    common(p)
    p.add_argument("--drop-row", metavar="ROLE:INDEX", help="delete one table row of ROLE before checking")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="run a scenario file or a preset")
    common(p, protocol=False)
    p.add_argument("--protocol", help="preset protocol name")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--transport", choices=TRANSPORTS, default="udp")
    p.add_argument("--variant", choices=VARIANTS, default="correct")
    p.add_argument("--unmonitored", action="store_true", help="run without monitors")
    p.add_argument("--seed", type=int)
    p.add_argument("--log", help="write the event log here")
    p.set_defaults(func=cmd_simulate, format="csv")

    p = sub.add_parser("corpus", help="list the corpus or check and simulate all of it")
    common(p, protocol=False)
    p.add_argument("action", choices=("list", "run-all"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_corpus)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SessionTypeError, FileNotFoundError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
