"""Deterministic discrete-event simulation of monitored session traffic.

Topology: every host sits behind its own border switch (or shares one with a partner role);
a packet goes host -> sender's switch -> receiver's switch -> host, and every switch with a
monitor checks it on the way. Over "udp" the switches run the plain match-action monitor and
links are ideal; over "tcp" hosts talk through reliable channels, switches run the
sequence-number aware monitor, and host uplinks may duplicate and delay packets while
downlinks may drop them.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Union

from .monitor import IdMap, Unmonitorable, automaton_to_mat, compose_restrict, synthesize_automaton
from .protocol import Protocol, load_protocol
from .st_core import End, ExtChoice, IntChoice, messages_of, oldest_from, QueuedMsg, unfold
from .tcp import (
    AckArrived, ChannelReceiver, ChannelSender, DataArrived, Deliver, GiveUp, ScheduleTimeout,
    SendAck, SendData, TcpMonState, TcpVerdict, Timeout, Transmit, reliable_channel_step,
    tcp_monitor_step,
)
from .wire import Accept, Kind, SwitchState, make_packet, monitor_packet

COMPLETED, STUCK, CLOSED = "Completed", "Stuck", "Closed"


class ScenarioError(ValueError):
    pass


# Host scripts


@dataclass(frozen=True)
class Injection:
    """An extra message sent just before the host's `before_send`-th protocol send (0-based)."""
    before_send: int
    recipient: str
    label: str


@dataclass(frozen=True)
class Conformant:
    """Follow the role's session type. Multi-branch sends consume `picks` in order
    (a label, or `Recipient!label` when the label alone is ambiguous), then fall back to the
    seeded RNG. `injections` add off-protocol messages at fixed points."""
    picks: tuple = ()
    injections: tuple = ()

    @property
    def faulty(self) -> bool:
        return bool(self.injections)


@dataclass(frozen=True)
class Explicit:
    """A fixed list of steps ("send", peer, label) or ("recv", peer, label or None)."""
    steps: tuple = ()

    @property
    def faulty(self) -> bool:
        return True


HostScript = Union[Conformant, Explicit]


@dataclass(frozen=True)
class SessionGroup:
    count: int
    scripts: dict = field(default_factory=dict)  # role -> HostScript; missing roles are Conformant()

    def script(self, role: str) -> HostScript:
        return self.scripts.get(role, Conformant())

    @property
    def faulty(self) -> bool:
        return any(s.faulty for s in self.scripts.values())


@dataclass(frozen=True)
class LinkFaults:
    loss_pct: float = 0.0
    dup_pct: float = 0.0
    max_delay_ms: float = 0.0

    @property
    def ideal(self) -> bool:
        return self.loss_pct == 0 and self.dup_pct == 0 and self.max_delay_ms == 0


@dataclass(frozen=True)
class Timing:
    link_latency_us: int = 1000
    session_gap_us: int = 1000
    rto_us: int = 200_000
    max_tries: int = 5
    time_limit_us: int = 3_600_000_000


@dataclass
class Scenario:
    protocol: str
    groups: list
    transport: str = "udp"
    faults: LinkFaults = LinkFaults()
    seed: int = 0
    monitored: bool = True
    unmonitored: tuple = ()
    shared: tuple = ()  # pairs of roles behind one switch with a joint monitor
    timing: Timing = Timing()
    variant: str = "correct"
    name: str = ""

    @property
    def sessions(self) -> int:
        return sum(g.count for g in self.groups)

    @property
    def transport_name(self) -> str:
        if self.transport == "udp":
            return "udp"
        return "tcp-reliable" if self.faults.ideal else "tcp-unreliable"

    def validate(self, proto: Protocol) -> None:
        if self.transport not in ("udp", "tcp"):
            raise ScenarioError(f"unknown transport {self.transport!r}")
        if self.transport == "udp" and not self.faults.ideal:
            raise ScenarioError("lossy links need the tcp transport; the plain monitor assumes ideal links")
        if not self.groups or any(g.count < 1 for g in self.groups):
            raise ScenarioError("every session group needs a positive count")
        if self.sessions > 1023:
            raise ScenarioError(f"{self.sessions} sessions do not fit 10-bit session ids")
        if not proto.starts_with_send(proto.initiator):
            raise ScenarioError(f"initiator {proto.initiator} must start by sending")
        roles = set(proto.roles)
        for r in self.unmonitored:
            if r not in roles:
                raise ScenarioError(f"unmonitored role {r!r} is not in {proto.name}")
        seen = set()
        for pair in self.shared:
            if len(pair) != 2 or pair[0] == pair[1] or not set(pair) <= roles:
                raise ScenarioError(f"bad shared pair {pair!r}")
            if seen & set(pair):
                raise ScenarioError(f"role shared twice in {pair!r}")
            seen |= set(pair)
        labels = set(proto.labels)
        for g in self.groups:
            for role, s in g.scripts.items():
                if role not in roles:
                    raise ScenarioError(f"script for unknown role {role!r}")
                sends = [(i.recipient, i.label) for i in s.injections] if isinstance(s, Conformant) else \
                    [(st[1], st[2]) for st in s.steps if st[0] == "send"]
                for peer, label in sends:
                    if peer not in roles or peer == role:
                        raise ScenarioError(f"{role}: bad recipient {peer!r}")
                    if label not in labels:
                        raise ScenarioError(f"{role}: label {label!r} is not in {proto.name}")
                if isinstance(s, Explicit):
                    if s.steps and s.steps[0][0] == "send" and not proto.starts_with_send(role):
                        raise ScenarioError(f"{role}: only roles whose type starts with a send may send first")
                    for st in s.steps:
                        if st[0] not in ("send", "recv"):
                            raise ScenarioError(f"{role}: unknown step {st!r}")

    # JSON form

    def to_dict(self) -> dict:
        def script(s):
            if isinstance(s, Explicit):
                return {"explicit": [list(st) for st in s.steps]}
            return {"picks": list(s.picks), "injections": [[i.before_send, i.recipient, i.label] for i in s.injections]}
        return {
            "protocol": self.protocol, "name": self.name, "variant": self.variant,
            "transport": self.transport, "faults": asdict(self.faults), "seed": self.seed,
            "monitored": self.monitored, "unmonitored": list(self.unmonitored),
            "shared": [list(p) for p in self.shared], "timing": asdict(self.timing),
            "groups": [{"count": g.count, "scripts": {r: script(s) for r, s in sorted(g.scripts.items())}}
                       for g in self.groups],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        def script(s):
            if "explicit" in s:
                return Explicit(tuple(tuple(st) for st in s["explicit"]))
            return Conformant(tuple(s.get("picks", ())), tuple(Injection(*i) for i in s.get("injections", ())))
        return cls(
            protocol=d["protocol"],
            groups=[SessionGroup(g["count"], {r: script(s) for r, s in g.get("scripts", {}).items()})
                    for g in d["groups"]],
            transport=d.get("transport", "udp"),
            faults=LinkFaults(**d.get("faults", {})),
            seed=d.get("seed", 0),
            monitored=d.get("monitored", True),
            unmonitored=tuple(d.get("unmonitored", ())),
            shared=tuple(tuple(p) for p in d.get("shared", ())),
            timing=Timing(**d.get("timing", {})),
            variant=d.get("variant", "correct"),
            name=d.get("name", ""),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


# Session id adoption


@dataclass
class SessionManager:
    """Per-host binding of session ids to the host's session instances."""
    bound: dict = field(default_factory=dict)  # session id -> instance index
    unbound: list = field(default_factory=list)  # instance indices still waiting for an id
    parked: list = field(default_factory=list)  # packets no instance could take

    def claim(self, session_id: int) -> int | None:
        if session_id in self.bound:
            return self.bound[session_id]
        if not self.unbound:
            return None
        inst = self.unbound.pop(0)
        self.bound[session_id] = inst
        return inst


def adopt_session_id(mgr: SessionManager, header) -> int | None:
    """Instance that owns the packet's session id, binding the oldest waiting instance to an unseen id."""
    return mgr.claim(header.session_id)


# Hosts


class _Instance:
    def __init__(self, role: str, index: int, ty, script: HostScript, rng: random.Random):
        self.role, self.index, self.script, self.rng = role, index, script, rng
        self.ty = ty
        self.queue: list[QueuedMsg] = []
        self.sid: int | None = None
        self.sends = 0
        self.ssn = 0
        self.pick = 0
        self.step = 0
        self.injected = 0
        self.done = False
        self.blocked = False

    def _choose(self, t: IntChoice):
        if len(t.branches) == 1:
            return t.branches[0]
        picks = self.script.picks
        if self.pick < len(picks):
            want = picks[self.pick]
            self.pick += 1
            hits = [b for b in t.branches if want in (b.label, f"{b.recipient}!{b.label}")]
            if len(hits) != 1:
                raise ScenarioError(f"{self.role}: pick {want!r} matches {len(hits)} of "
                                    f"{[f'{b.recipient}!{b.label}' for b in t.branches]}")
            return hits[0]
        return self.rng.choice(t.branches)

    def _injections(self, upto: int | None):
        inj = self.script.injections
        out = []
        while self.injected < len(inj) and (upto is None or inj[self.injected].before_send <= upto):
            out.append((inj[self.injected].recipient, inj[self.injected].label))
            self.injected += 1
        return out

    def run(self) -> list[tuple[str, str]]:
        """Advance until blocked; returns the (recipient, label) messages to send, in order."""
        out = []
        if self.done or self.blocked:
            return out
        if isinstance(self.script, Explicit):
            steps = self.script.steps
            while self.step < len(steps):
                kind, peer, *rest = steps[self.step]
                label = rest[0] if rest else None
                if kind == "send":
                    out.append((peer, label))
                else:
                    found = oldest_from(self.queue, peer)
                    if found is None:
                        return out
                    i, m = found
                    if label is not None and m.label != label:
                        self.blocked = True
                        return out
                    del self.queue[i]
                self.step += 1
            self.done = True
            return out
        while True:
            t = unfold(self.ty)
            if isinstance(t, IntChoice):
                out.extend(self._injections(self.sends))
                b = self._choose(t)
                out.append((b.recipient, b.label))
                self.sends += 1
                self.ty = b.cont
            elif isinstance(t, ExtChoice):
                found = oldest_from(self.queue, t.sender)
                if found is None:
                    return out
                i, m = found
                nxt = next((b.cont for b in t.branches if b.label == m.label and b.sort == m.sort), None)
                if nxt is None:
                    self.blocked = True
                    return out
                del self.queue[i]
                self.ty = nxt
            else:
                assert isinstance(t, End)
                out.extend(self._injections(None))
                self.done = True
                return out


class _Host:
    def __init__(self, role: str):
        self.role = role
        self.instances: list[_Instance] = []
        self.mgr = SessionManager()
        self.tx: dict = {}  # (sid, peer) -> ChannelSender
        self.rx: dict = {}  # (sid, peer) -> ChannelReceiver
        self.delivered: Counter = Counter()


# Switches


class _Switch:
    def __init__(self, name: str, roles: tuple, monitor):
        self.name, self.roles, self.monitor = name, roles, monitor
        self.counts = Counter()
        self.closed_at: set = set()


# Report


CSV_COLUMNS = ("protocol", "transport", "variant", "accepted", "rejected", "retransmissions",
               "sessions", "completed", "stuck", "closed")


@dataclass
class SimReport:
    protocol: str
    transport: str
    variant: str
    accepted: int = 0
    rejected: int = 0
    retransmissions: int = 0
    outcomes: dict = field(default_factory=dict)  # session id -> Completed | Stuck | Closed
    faulty_sessions: frozenset = frozenset()
    per_monitor: dict = field(default_factory=dict)
    delivered: dict = field(default_factory=dict)  # role -> Counter of (session id, sender, label)
    accepts_after_close: int = 0
    transport_retransmissions: int = 0
    events: list = field(default_factory=list)

    @property
    def sessions(self) -> int:
        return len(self.outcomes)

    def count(self, outcome: str) -> int:
        return sum(1 for o in self.outcomes.values() if o == outcome)

    @property
    def completed(self) -> int:
        return self.count(COMPLETED)

    @property
    def stuck(self) -> int:
        return self.count(STUCK)

    @property
    def closed(self) -> int:
        return self.count(CLOSED)

    def csv_row(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}

    def event_log(self) -> str:
        return "".join(line + "\n" for line in self.events)


def write_csv(reports, out=None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.csv_row())
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text)
    return text


# Simulator


class _Sim:
    def __init__(self, s: Scenario, proto: Protocol):
        self.s, self.proto = s, proto
        self.tcp = s.transport == "tcp"
        self.rng = random.Random(s.seed)
        self.ids = IdMap.build(proto.role_names, proto.labels)
        self.sort_of = {m[2]: m[3] for t in proto.roles.values() for m in messages_of(t)}
        self.heap: list = []
        self.seq = 0
        self.now = 0
        self.lat = s.timing.link_latency_us
        self.report = SimReport(s.name or proto.name, s.transport_name, s.variant)
        self.hosts = {r: _Host(r) for r in proto.role_names}
        self._build_switches()
        self._build_instances()

    # setup

    def _build_switches(self):
        s, proto = self.s, self.proto
        self.switch_of: dict[str, _Switch] = {}
        self.switches: dict[str, _Switch] = {}
        pairs = {r: p for p in s.shared for r in p}
        done = set()
        for role in proto.role_names:
            if role in done:
                continue
            roles = tuple(sorted(pairs.get(role, (role,))))
            done |= set(roles)
            monitor = None
            if s.monitored and not set(roles) & set(s.unmonitored):
                if len(roles) == 1:
                    a = synthesize_automaton(proto.roles[role])
                    if isinstance(a, Unmonitorable):
                        raise ScenarioError(f"role {role} is not monitorable: {a.reason}")
                    mat = automaton_to_mat(a, role, self.ids)
                else:
                    autos = []
                    for r in roles:
                        a = synthesize_automaton(proto.roles[r])
                        if isinstance(a, Unmonitorable):
                            raise ScenarioError(f"role {r} is not monitorable: {a.reason}")
                        autos.append(a)
                    joint = compose_restrict(autos[0], roles[0], autos[1], roles[1])
                    mat = automaton_to_mat(joint, None, self.ids)
                core = SwitchState(mat, self.ids)
                monitor = TcpMonState(core) if self.tcp else core
            sw = _Switch("sw:" + "+".join(roles), roles, monitor)
            for r in roles:
                self.switch_of[r] = sw
            self.switches[sw.name] = sw

    def _build_instances(self):
        proto, s = self.proto, self.s
        initiators = [r for r in proto.role_names if proto.starts_with_send(r)]
        k = 0
        for g in s.groups:
            for _ in range(g.count):
                for role, host in self.hosts.items():
                    rng = random.Random(f"{s.seed}:{role}:{k}")
                    inst = _Instance(role, k, proto.roles[role], g.script(role), rng)
                    host.instances.append(inst)
                    if role in initiators:
                        inst.sid = k + 1
                        host.mgr.bound[k + 1] = k
                        self._push(k * s.timing.session_gap_us, "run", (role, k))
                    else:
                        host.mgr.unbound.append(k)
                k += 1

    # event plumbing

    def _push(self, t: int, kind: str, data):
        heapq.heappush(self.heap, (t, self.seq, kind, data))
        self.seq += 1

    def log(self, text: str):
        self.report.events.append(f"{self.now:>12} {text}")

    def _desc(self, p) -> str:
        h = p.header
        snd, rcv = self.ids.role_name(h.sender_id), self.ids.role_name(h.receiver_id)
        if p.kind is Kind.SESSION:
            return f"sid={h.session_id} {snd}->{rcv} {self.ids.label_name(h.label_id)} ssn={h.ssn}"
        extra = f" ack={p.ack}" if p.kind is Kind.ACK else ""
        return f"sid={h.session_id} {snd}->{rcv} {p.kind.value}{extra}"

    def _uplink(self, src: str, p, tag):
        f = self.s.faults
        copies = 1
        if f.dup_pct and self.rng.random() < f.dup_pct / 100:
            copies = 2
            self.log(f"dup {self._desc(p)}")
        for c in range(copies):
            delay = self.rng.randint(0, int(f.max_delay_ms * 1000)) if f.max_delay_ms else 0
            t = tag if c == 0 else dict(tag, verdicts=[])
            self._push(self.now + self.lat + delay, "switch", (self.switch_of[src].name, p, t))

    def _downlink(self, dst: str, p):
        f = self.s.faults
        if f.loss_pct and self.rng.random() < f.loss_pct / 100:
            self.log(f"lost {self._desc(p)}")
            return
        self._push(self.now + self.lat, "host", (dst, p))

    def _transmit(self, src: str, dst: str, p):
        mons = [sw.name for sw in dict.fromkeys((self.switch_of[src], self.switch_of[dst])) if sw.monitor]
        self._uplink(src, p, {"mons": mons, "verdicts": []})

    # host side

    def _emit(self, host: _Host, inst: _Instance, recipient: str, label: str):
        inst.ssn += 1
        p = make_packet(self.ids, inst.sid, host.role, recipient, label, inst.ssn)
        self.log(f"send {self._desc(p)}")
        if not self.tcp:
            self._transmit(host.role, recipient, p)
            return
        key = (inst.sid, recipient)
        ch = host.tx.get(key)
        if ch is None:
            ch = host.tx[key] = ChannelSender(self.s.timing.rto_us, self.s.timing.max_tries)
            self._transmit(host.role, recipient, make_packet(self.ids, inst.sid, host.role, recipient, "", kind=Kind.SYN))
        self._channel_actions(host, key, reliable_channel_step(ch, SendData(p)))

    def _channel_actions(self, host: _Host, key, actions):
        sid, peer = key
        for a in actions:
            if isinstance(a, Transmit):
                if a.retransmission:
                    self.report.transport_retransmissions += 1
                    self.log(f"resend {self._desc(a.packet)}")
                self._transmit(host.role, peer, a.packet)
            elif isinstance(a, ScheduleTimeout):
                self._push(self.now + a.delay_us, "timer", (host.role, key, a.seq))
            elif isinstance(a, GiveUp):
                self.log(f"give-up sid={sid} {host.role}->{peer} seq={a.seq}")

    def _run(self, host: _Host, idx: int):
        inst = host.instances[idx]
        was_done = inst.done
        for recipient, label in inst.run():
            self._emit(host, inst, recipient, label)
        if inst.done and not was_done:
            self.log(f"done sid={inst.sid} {host.role}")
            if self.tcp:
                for (sid, peer) in sorted(k for k in host.tx if k[0] == inst.sid):
                    self._transmit(host.role, peer, make_packet(self.ids, sid, host.role, peer, "", kind=Kind.FIN))
        elif inst.blocked:
            self.log(f"blocked sid={inst.sid} {host.role}")

    def _deliver(self, host: _Host, p):
        h = p.header
        sender, label = self.ids.role_name(h.sender_id), self.ids.label_name(h.label_id)
        host.delivered[(h.session_id, sender, label)] += 1
        idx = adopt_session_id(host.mgr, h)
        if idx is None:
            host.mgr.parked.append(p)
            self.log(f"parked {self._desc(p)}")
            return
        inst = host.instances[idx]
        if inst.sid is None:
            inst.sid = h.session_id
            self.log(f"adopt sid={h.session_id} {host.role}#{idx}")
        inst.queue.append(QueuedMsg(sender, label, self.sort_of[label]))
        self._run(host, idx)

    def _host_packet(self, role: str, p):
        host = self.hosts[role]
        h = p.header
        peer = self.ids.role_name(h.sender_id)
        if not self.tcp:
            self._deliver(host, p)
            return
        key = (h.session_id, peer)
        if p.kind is Kind.ACK:
            ch = host.tx.get(key)
            if ch is not None:
                reliable_channel_step(ch, AckArrived(p.ack))
            return
        if p.kind is not Kind.SESSION:
            return
        rx = host.rx.setdefault(key, ChannelReceiver())
        for a in reliable_channel_step(rx, DataArrived(p)):
            if isinstance(a, Deliver):
                self._deliver(host, a.packet)
            elif isinstance(a, SendAck):
                ack = make_packet(self.ids, h.session_id, role, peer, "", kind=Kind.ACK, ack=a.ack)
                self._transmit(role, peer, ack)

    # switch side

    def _check(self, sw: _Switch, p):
        if self.tcp:
            v = tcp_monitor_step(sw.monitor, p, sw.roles)
            return v.value, v in (TcpVerdict.AcceptAdvance, TcpVerdict.AcceptRetransmit, TcpVerdict.PassThroughControl), v
        v = monitor_packet(sw.monitor, p)
        return ("Accept" if isinstance(v, Accept) else "Reject"), isinstance(v, Accept), v

    def _switch_packet(self, name: str, p, tag):
        sw = self.switches[name]
        h = p.header
        dst = self.ids.role_name(h.receiver_id)
        if sw.monitor is not None:
            verdict, ok, raw = self._check(sw, p)
            if p.kind is Kind.SESSION:
                self.log(f"{sw.name} {self._desc(p)} {verdict}")
                if raw is TcpVerdict.AcceptRetransmit:
                    sw.counts["retransmissions"] += 1
                elif ok:
                    sw.counts["accepted"] += 1
                else:
                    sw.counts["rejected"] += 1
                if raw is TcpVerdict.RejectAndClose:
                    sw.counts["closed"] += 1
                    sw.closed_at.add(h.session_id)
                elif ok and h.session_id in sw.closed_at:
                    self.report.accepts_after_close += 1
                tag["verdicts"].append(raw)
                if not ok:
                    self.report.rejected += 1
                    return
                if len(tag["verdicts"]) == len(tag["mons"]):
                    if any(v is TcpVerdict.AcceptRetransmit for v in tag["verdicts"]):
                        self.report.retransmissions += 1
                    else:
                        self.report.accepted += 1
            else:
                sw.counts["control"] += 1
        if self.switch_of[dst] is sw:
            self._downlink(dst, p)
        else:
            self._push(self.now + self.lat, "switch", (self.switch_of[dst].name, p, tag))

    # main loop

    def run(self) -> SimReport:
        limit = self.s.timing.time_limit_us
        while self.heap:
            t, _, kind, data = heapq.heappop(self.heap)
            if t > limit:
                self.log("time limit reached")
                break
            self.now = t
            if kind == "run":
                role, idx = data
                self._run(self.hosts[role], idx)
            elif kind == "switch":
                self._switch_packet(*data)
            elif kind == "host":
                self._host_packet(*data)
            elif kind == "timer":
                role, key, seq = data
                host = self.hosts[role]
                self._channel_actions(host, key, reliable_channel_step(host.tx[key], Timeout(seq)))
        return self._finish()

    def _finish(self) -> SimReport:
        rep = self.report
        closed = set()
        for sw in self.switches.values():
            if sw.monitor is not None:
                rep.per_monitor[sw.name] = {k: sw.counts[k] for k in ("accepted", "rejected", "retransmissions", "closed")}
                if isinstance(sw.monitor, TcpMonState):
                    closed |= sw.monitor.closed
        rep.per_monitor = dict(sorted(rep.per_monitor.items()))
        faulty = set()
        for sid in range(1, self.s.sessions + 1):
            ok = True
            for host in self.hosts.values():
                idx = host.mgr.bound.get(sid)
                if idx is None:
                    continue
                inst = host.instances[idx]
                if inst.script.faulty:
                    faulty.add(sid)
                # a role may wait forever for a branch that was not taken; unread or
                # mismatched input is what marks a session as stuck
                if inst.blocked or inst.queue or (host.role == self.proto.initiator and not inst.done):
                    ok = False
                if any(ch.unacked or ch.failed for (s, _), ch in host.tx.items() if s == sid):
                    ok = False
            if any(p.header.session_id == sid for host in self.hosts.values() for p in host.mgr.parked):
                ok = False
            rep.outcomes[sid] = CLOSED if sid in closed else COMPLETED if ok else STUCK
        rep.faulty_sessions = frozenset(faulty)
        rep.delivered = {r: h.delivered for r, h in self.hosts.items()}
        return rep


def run_simulation(s: Scenario, proto: Protocol | None = None) -> SimReport:
    proto = proto or load_protocol(s.protocol)
    s.validate(proto)
    return _Sim(s, proto).run()
