"""Closed networks of typed endpoints, their monitored twins, and bounded checks over both."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Mapping

import networkx as nx

from .monitor import DEFAULT_LIMITS, SynthLimits, accept_enqueue, accept_send, monitor_queue_state
from .st_core import (
    EndpointConfig, ExtChoice, IntChoice, QueuedMsg, SessionType, canonical, canonical_queue,
    deq_transition, unfold,
)


class StateBoundExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ExplorationBounds:
    max_queue_len: int = 4  # per sender, per receiving endpoint
    max_states: int = 200_000

    def __post_init__(self):
        if self.max_queue_len <= 0 or self.max_states <= 0:
            raise ValueError("bounds must be positive")


@dataclass(frozen=True, order=True)
class Comm:
    sender: str
    receiver: str
    label: str
    sort: str

    def __str__(self):
        return f"{self.sender}->{self.receiver}:{self.label}({self.sort})"


@dataclass(frozen=True, order=True)
class NetDeq:
    at: str
    sender: str
    label: str
    sort: str

    def __str__(self):
        return f"{self.at}<-{self.sender}:{self.label}({self.sort})"


@dataclass(frozen=True)
class Holds:
    def __bool__(self):
        return True

    def __str__(self):
        return "holds"


@dataclass(frozen=True)
class Fails:
    witness: tuple  # labels leading from the initial state to the violation
    reason: str = ""

    def __bool__(self):
        return False

    def __str__(self):
        path = " ; ".join(str(l) for l in self.witness) or "(initial state)"
        return f"fails: {self.reason}\n  witness: {path}"


HOLDS = Holds()


def _endpoint(ty: SessionType, queue: Iterable[QueuedMsg] = ()) -> EndpointConfig:
    return EndpointConfig(canonical(ty), canonical_queue(queue))


@dataclass(frozen=True)
class Network:
    roles: tuple
    configs: tuple  # EndpointConfig per role

    @classmethod
    def of(cls, endpoints: Mapping[str, object]) -> "Network":
        roles = tuple(sorted(endpoints))
        cfgs = []
        for r in roles:
            c = endpoints[r]
            if not isinstance(c, EndpointConfig):
                c = EndpointConfig(c, ())
            if any(m.sender == r for m in c.queue):
                raise ValueError(f"role {r} has its own message in its queue")
            cfgs.append(_endpoint(c.ty, c.queue))
        return cls(roles, tuple(cfgs))

    def config(self, role: str) -> EndpointConfig:
        return self.configs[self.roles.index(role)]

    def __str__(self):
        return " | ".join(f"{r}: <{c.ty}, [{', '.join(map(str, c.queue))}]>" for r, c in zip(self.roles, self.configs))


@dataclass(frozen=True)
class MonitoredNetwork:
    roles: tuple
    configs: tuple
    monitors: tuple  # monitor term per role

    def bare(self) -> Network:
        return Network(self.roles, self.configs)


def network_of_protocol(proto) -> Network:
    return Network.of(dict(proto.roles))


def instrument(n: Network, lim: SynthLimits = DEFAULT_LIMITS) -> MonitoredNetwork:
    """Pair every endpoint with the monitor state its type and queue determine.

    Raises ValueError naming the role whose queue its monitor would reject.
    """
    mons = []
    for r, c in zip(n.roles, n.configs):
        m = monitor_queue_state(c.ty, c.queue, lim)
        if m is None:
            raise ValueError(f"no consistent monitor for role {r}: its queue is rejected")
        mons.append(m)
    return MonitoredNetwork(n.roles, n.configs, tuple(mons))


# Steps


@lru_cache(maxsize=None)
def _sends(ty: SessionType):
    u = unfold(ty)
    if isinstance(u, IntChoice):
        return tuple((b.recipient, b.label, b.sort, canonical(b.cont)) for b in u.branches)
    return ()


@lru_cache(maxsize=None)
def _deq(c: EndpointConfig):
    d = deq_transition(c)
    if d is None:
        return None
    lab, nc = d
    return lab, EndpointConfig(canonical(nc.ty), nc.queue)


def _enqueue(c: EndpointConfig, msg: QueuedMsg) -> EndpointConfig:
    return EndpointConfig(c.ty, canonical_queue(c.queue + (msg,)))


def _channel_full(c: EndpointConfig, sender: str, bounds: ExplorationBounds) -> bool:
    # the bound applies to each per-sender FIFO of the multi-input queue
    return sum(1 for m in c.queue if m.sender == sender) >= bounds.max_queue_len


def net_step(n: Network, bounds: ExplorationBounds = ExplorationBounds()):
    out = []
    idx = {r: i for i, r in enumerate(n.roles)}
    for i, (p, c) in enumerate(zip(n.roles, n.configs)):
        for q, label, sort, cont in _sends(c.ty):
            j = idx.get(q)
            if j is None or _channel_full(n.configs[j], p, bounds):
                continue
            cfgs = list(n.configs)
            cfgs[i] = EndpointConfig(cont, c.queue)
            cfgs[j] = _enqueue(cfgs[j], QueuedMsg(p, label, sort))
            out.append((Comm(p, q, label, sort), Network(n.roles, tuple(cfgs))))
        d = _deq(c)
        if d is not None:
            lab, nc = d
            cfgs = list(n.configs)
            cfgs[i] = nc
            out.append((NetDeq(p, lab.sender, lab.label, lab.sort), Network(n.roles, tuple(cfgs))))
    return out


def mnet_step(m: MonitoredNetwork, bounds: ExplorationBounds = ExplorationBounds(),
              lim: SynthLimits = DEFAULT_LIMITS):
    out = []
    idx = {r: i for i, r in enumerate(m.roles)}
    for i, (p, c) in enumerate(zip(m.roles, m.configs)):
        for q, label, sort, cont in _sends(c.ty):
            j = idx.get(q)
            if j is None or _channel_full(m.configs[j], p, bounds):
                continue
            mp = accept_send(m.monitors[i], q, label, sort)
            if mp is None:
                continue
            mq = accept_enqueue(m.monitors[j], p, label, sort, lim)
            if mq is None:
                continue
            cfgs, mons = list(m.configs), list(m.monitors)
            cfgs[i] = EndpointConfig(cont, c.queue)
            cfgs[j] = _enqueue(cfgs[j], QueuedMsg(p, label, sort))
            mons[i], mons[j] = mp, mq
            out.append((Comm(p, q, label, sort), MonitoredNetwork(m.roles, tuple(cfgs), tuple(mons))))
        d = _deq(c)
        if d is not None:
            lab, nc = d
            cfgs = list(m.configs)
            cfgs[i] = nc
            out.append((NetDeq(p, lab.sender, lab.label, lab.sort), MonitoredNetwork(m.roles, tuple(cfgs), m.monitors)))
    return out


# Exploration


@dataclass
class StateGraph:
    states: list
    edges: list  # per state: list of (label, target index)
    parent: list  # per state: (previous index, label) on a shortest path, None for the root

    def path_to(self, i: int) -> tuple:
        labels = []
        while self.parent[i] is not None:
            i, lab = self.parent[i]
            labels.append(lab)
        return tuple(reversed(labels))

    def __len__(self):
        return len(self.states)


def explore(init, step: Callable, max_states: int) -> StateGraph:
    index = {init: 0}
    states, edges, parent = [init], [], [None]
    todo = deque([0])
    while todo:
        i = todo.popleft()
        succ = []
        for lab, nxt in step(states[i]):
            j = index.get(nxt)
            if j is None:
                if len(states) >= max_states:
                    raise StateBoundExceeded(
                        f"more than {max_states} states; lower the queue bound or raise the state cap")
                j = index[nxt] = len(states)
                states.append(nxt)
                parent.append((i, lab))
                todo.append(j)
            succ.append((lab, j))
        while len(edges) <= i:
            edges.append([])
        edges[i] = succ
    return StateGraph(states, edges, parent)


def explore_network(n: Network, bounds: ExplorationBounds = ExplorationBounds()) -> StateGraph:
    return explore(n, lambda s: net_step(s, bounds), bounds.max_states)


def explore_monitored(m: MonitoredNetwork, bounds: ExplorationBounds = ExplorationBounds()) -> StateGraph:
    return explore(m, lambda s: mnet_step(s, bounds), bounds.max_states)


def replay(init, step: Callable, labels: Iterable):
    """Follow `labels` from init; raises ValueError if one is not offered."""
    s = init
    for lab in labels:
        for l2, nxt in step(s):
            if l2 == lab:
                s = nxt
                break
        else:
            raise ValueError(f"{lab} not offered")
    return s


# Checks


def check_half_duplex(n: Network, bounds: ExplorationBounds = ExplorationBounds()):
    g = explore_network(n, bounds)
    for i, s in enumerate(g.states):
        senders = {r: {m.sender for m in c.queue} for r, c in zip(s.roles, s.configs)}
        for p in s.roles:
            for q in senders[p]:
                if p in senders.get(q, ()):
                    return Fails(g.path_to(i), f"{p} and {q} both hold a message from the other")
    return HOLDS


def _queued_pairs(s) -> set:
    return {(r, m.sender) for r, c in zip(s.roles, s.configs) for m in c.queue}


def check_output_live(n: Network, bounds: ExplorationBounds = ExplorationBounds()):
    """Bounded, conservative output-liveness check.

    Fails if some queued message can never be dequeued from a reachable state, or if a
    fair cycle exists along which a queued message is never dequeued.
    """
    g = explore_network(n, bounds)
    pending = [_queued_pairs(s) for s in g.states]
    keys = sorted(set().union(*pending)) if pending else []
    rev = [[] for _ in g.states]
    for i, succ in enumerate(g.edges):
        for _, j in succ:
            rev[j].append(i)

    for at, sender in keys:
        # (a) states from which the oldest message from `sender` at `at` can still be consumed
        can = set()
        todo = deque(i for i, succ in enumerate(g.edges)
                     if any(isinstance(l, NetDeq) and l.at == at and l.sender == sender for l, _ in succ))
        can.update(todo)
        while todo:
            j = todo.popleft()
            for i in rev[j]:
                if i not in can:
                    can.add(i)
                    todo.append(i)
        for i, pend in enumerate(pending):
            if (at, sender) in pend and i not in can:
                return Fails(g.path_to(i), f"message from {sender} queued at {at} can never be consumed")

        # (b) fair cycles along which that message stays queued
        nodes = {i for i, pend in enumerate(pending) if (at, sender) in pend}
        cyc = _fair_cycle(g, nodes, lambda l: isinstance(l, NetDeq) and l.at == at and l.sender == sender)
        if cyc is not None:
            return Fails(g.path_to(cyc), f"fair cycle keeps a message from {sender} queued at {at}")
    return HOLDS


def _fair_cycle(g: StateGraph, nodes: set, excluded: Callable) -> int | None:
    """A state on a fair cycle inside `nodes` avoiding `excluded` edges, if one exists."""
    work = [set(nodes)]
    while work:
        region = work.pop()
        sub = nx.DiGraph()
        sub.add_nodes_from(region)
        for i in region:
            for lab, j in g.edges[i]:
                if j in region and not excluded(lab):
                    sub.add_edge(i, j, label=lab)
        for comp in nx.strongly_connected_components(sub):
            if len(comp) == 1:
                (only,) = comp
                if not sub.has_edge(only, only):
                    continue
            taken = {d["label"] for a, b, d in sub.edges(comp, data=True) if b in comp}
            # every transition enabled somewhere on the cycle must also be taken on it
            unfair = {i for i in comp if any(lab not in taken for lab, _ in g.edges[i])}
            if not unfair:
                return min(comp)
            rest = comp - unfair
            if rest:
                work.append(rest)
    return None


def _refine(graphs: list[StateGraph]) -> list[list[int]]:
    """Coarsest strong bisimulation over the disjoint union, as block ids per graph."""
    blocks = [[0] * len(g) for g in graphs]
    count = 1
    while True:
        sigs = {}
        new = [[0] * len(g) for g in graphs]
        for gi, g in enumerate(graphs):
            for i, succ in enumerate(g.edges):
                sig = (blocks[gi][i], frozenset((lab, blocks[gi][j]) for lab, j in succ))
                new[gi][i] = sigs.setdefault(sig, len(sigs))
        if len(sigs) == count:
            return new
        blocks, count = new, len(sigs)


def table_step(s, tables: Mapping, bounds: ExplorationBounds = ExplorationBounds()):
    """Steps of a network whose endpoints are guarded by match-action tables.

    `s` is (network, per-role table state); roles without a table accept everything.
    """
    n, states = s
    out = []
    for lab, n2 in net_step(n, bounds):
        if isinstance(lab, Comm):
            st = list(states)
            ok = True
            for k, r in enumerate(n.roles):
                t = tables.get(r)
                if t is None or r not in (lab.sender, lab.receiver):
                    continue
                nxt = t.lookup(st[k], lab.sender, lab.receiver, lab.label)
                if nxt is None:
                    ok = False
                    break
                st[k] = nxt
            if ok:
                out.append((lab, (n2, tuple(st))))
        else:
            out.append((lab, (n2, states)))
    return out


def explore_tables(n: Network, tables: Mapping, bounds: ExplorationBounds = ExplorationBounds()) -> StateGraph:
    init = (n, tuple(tables[r].initial if r in tables else 0 for r in n.roles))
    return explore(init, lambda s: table_step(s, tables, bounds), bounds.max_states)


def internal_bisim(n: Network, m: MonitoredNetwork | None = None,
                   bounds: ExplorationBounds = ExplorationBounds(), tables: Mapping | None = None):
    """Strong bisimilarity over Comm/Deq labels between a network and its monitored twin.

    The twin is either `m` (monitors as pruned types) or `n` guarded by `tables`.
    """
    gn = explore_network(n, bounds)
    gm = explore_tables(n, tables, bounds) if tables is not None else explore_monitored(m, bounds)
    bn, bm = _refine([gn, gm])
    if bn[0] == bm[0]:
        return HOLDS
    # walk matching labels until the two sides disagree on what is offered
    seen = {(0, 0)}
    todo = deque([(0, 0, ())])
    while todo:
        i, j, path = todo.popleft()
        li = {lab: t for lab, t in gn.edges[i]}
        lj = {lab: t for lab, t in gm.edges[j]}
        only = sorted(set(li) ^ set(lj), key=str)
        if only:
            side = "network" if only[0] in li else "monitored network"
            return Fails(path + (only[0],), f"{only[0]} offered only by the {side}")
        for lab in sorted(li, key=str):
            nxt = (li[lab], lj[lab])
            if nxt not in seen and bn[nxt[0]] != bm[nxt[1]]:
                seen.add(nxt)
                todo.append((nxt[0], nxt[1], path + (lab,)))
    return Fails((), "initial states are not bisimilar")
