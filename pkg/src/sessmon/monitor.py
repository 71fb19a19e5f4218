"""Monitor states as pruned session types, automaton synthesis, MAT emission and composition."""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Union

from .st_core import (
    End, ExtChoice, IntChoice, QueuedMsg, Rec, RecvBranch, SendBranch, SessionType,
    canonical, messages_of, unfold,
)


class DepthExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class SynthLimits:
    max_states: int = 10000
    max_accept_depth: int = 256

    def __post_init__(self):
        if self.max_states <= 0 or self.max_accept_depth <= 0:
            raise ValueError("limits must be positive")


DEFAULT_LIMITS = SynthLimits()


@dataclass(frozen=True, order=True)
class AccEnqueue:
    sender: str
    label: str
    sort: str

    def wire(self, role):
        return Msg(self.sender, role, self.label, self.sort)

    def __str__(self):
        return f"?{self.sender}:{self.label}({self.sort})"


@dataclass(frozen=True, order=True)
class AccSend:
    recipient: str
    label: str
    sort: str

    def wire(self, role):
        return Msg(role, self.recipient, self.label, self.sort)

    def __str__(self):
        return f"!{self.recipient}:{self.label}({self.sort})"


@dataclass(frozen=True, order=True)
class Msg:
    """A message as seen on the wire, used by automata that guard several roles."""
    sender: str
    receiver: str
    label: str
    sort: str

    def wire(self, role=None):
        return self

    def __str__(self):
        return f"{self.sender}->{self.receiver}:{self.label}({self.sort})"


MonAction = Union[AccSend, AccEnqueue, Msg]


# Accepting single actions


@lru_cache(maxsize=None)
def _accept_send(m: SessionType, recipient, label, sort):
    u = unfold(m)
    if isinstance(u, IntChoice):
        for b in u.branches:
            if b.recipient == recipient and b.label == label and b.sort == sort:
                return canonical(b.cont)
    return None


def accept_send(m: SessionType, recipient: str, label: str, sort: str) -> SessionType | None:
    return _accept_send(canonical(m), recipient, label, sort)


def _enq(t, msg: QueuedMsg, visited: frozenset, depth: int, limit: int, canon: bool = True):
    """Rules for accepting an enqueued message, with a visited set so endless descents fail.

    `canon` says t is already in canonical form: true at the root and below it until the
    first unfolding, which spares most canonical() calls on deep terms.
    """
    if depth > limit:
        raise DepthExceeded(f"accept depth above {limit} while accepting {msg}")
    if isinstance(t, Rec):
        t, canon = unfold(t), False
    # compare up to bound-variable names, so an unfolded copy counts as a revisit
    key = t if canon else canonical(t)
    if key in visited:
        return None
    visited = visited | {key}
    if isinstance(t, ExtChoice):
        if t.sender == msg.sender:
            for b in t.branches:
                if b.label == msg.label and b.sort == msg.sort:
                    return b.cont
            return None
        kept = []
        for b in t.branches:
            r = _enq(b.cont, msg, visited, depth + 1, limit, canon)
            if r is not None:
                kept.append(RecvBranch(b.label, b.sort, r))
        return ExtChoice(t.sender, tuple(kept)) if kept else None
    if isinstance(t, IntChoice):
        if any(b.recipient == msg.sender for b in t.branches):
            return None
        kept = []
        for b in t.branches:
            r = _enq(b.cont, msg, visited, depth + 1, limit, canon)
            if r is not None:
                kept.append(SendBranch(b.recipient, b.label, b.sort, r))
        return IntChoice(tuple(kept)) if kept else None
    return None


@lru_cache(maxsize=None)
def _accept_enqueue(m: SessionType, msg: QueuedMsg, limit: int):
    r = _enq(m, msg, frozenset(), 0, limit)
    return None if r is None else canonical(r)


def accept_enqueue(m: SessionType, sender: str, label: str, sort: str,
                   lim: SynthLimits = DEFAULT_LIMITS) -> SessionType | None:
    """Monitor state after seeing a message from `sender` enter the queue, or None to reject."""
    return _accept_enqueue(canonical(m), QueuedMsg(sender, label, sort), lim.max_accept_depth)


def monitor_queue_state(t: SessionType, queue: Iterable[QueuedMsg],
                        lim: SynthLimits = DEFAULT_LIMITS) -> SessionType | None:
    m = canonical(t)
    for msg in queue:
        m = accept_enqueue(m, msg.sender, msg.label, msg.sort, lim)
        if m is None:
            return None
    return m


def accept(m: SessionType, action, lim: SynthLimits = DEFAULT_LIMITS) -> SessionType | None:
    if isinstance(action, AccSend):
        return accept_send(m, action.recipient, action.label, action.sort)
    return accept_enqueue(m, action.sender, action.label, action.sort, lim)


# Automata


@dataclass
class MonitorAutomaton:
    states: list  # state index -> term (or tuple of terms for composed automata)
    initial: int
    transitions: dict  # (state, action) -> state
    roles: tuple = ()

    def step(self, state: int, action) -> int | None:
        return self.transitions.get((state, action))

    def actions(self, state: int):
        return [a for (s, a) in self.transitions if s == state]

    def out_edges(self) -> dict[int, list]:
        out: dict[int, list] = {i: [] for i in range(len(self.states))}
        for (s, a), t in self.transitions.items():
            out[s].append((a, t))
        return out

    def __len__(self):
        return len(self.states)


@dataclass
class Unmonitorable:
    reason: str
    witness: SessionType | None = None

    def __bool__(self):
        return False


def candidate_actions(t: SessionType) -> list:
    """Every action a monitor state derived from t could possibly accept; receives first."""
    recvs, sends = set(), set()
    for d, peer, label, sort in messages_of(t):
        if d == "&":
            recvs.add(AccEnqueue(peer, label, sort))
        else:
            sends.add(AccSend(peer, label, sort))
    return sorted(recvs) + sorted(sends)


def synthesize_automaton(t: SessionType, lim: SynthLimits = DEFAULT_LIMITS,
                         universe: Iterable | None = None) -> MonitorAutomaton | Unmonitorable:
    """Breadth-first exploration of monitor states reachable from t.

    `universe` overrides the candidate actions; by default they are the message prefixes
    occurring in t, which are the only ones any derived state can accept.
    """
    acts = candidate_actions(t) if universe is None else list(universe)
    init = canonical(t)
    index = {init: 0}
    states = [init]
    trans = {}
    todo = deque([0])
    while todo:
        s = todo.popleft()
        for a in acts:
            try:
                nxt = accept(states[s], a, lim)
            except DepthExceeded as e:
                return Unmonitorable(str(e), states[s])
            if nxt is None:
                continue
            if nxt.depth > lim.max_accept_depth:
                return Unmonitorable(f"monitor term nesting above {lim.max_accept_depth}", nxt)
            if nxt not in index:
                if len(states) >= lim.max_states:
                    return Unmonitorable(f"more than {lim.max_states} monitor states", nxt)
                index[nxt] = len(states)
                states.append(nxt)
                todo.append(index[nxt])
            trans[(s, a)] = index[nxt]
    return MonitorAutomaton(states, 0, trans)


def compose_restrict(a_p: MonitorAutomaton, role_p: str, a_q: MonitorAutomaton, role_q: str) -> MonitorAutomaton:
    """Joint monitor for two roles sharing one entry point.

    Messages between the two roles synchronise (p's send with q's enqueue) into a single
    transition; unmatched halves are dropped and everything else interleaves.
    """
    if role_p == role_q:
        raise ValueError("roles must differ")
    out_p, out_q = a_p.out_edges(), a_q.out_edges()

    def moves(sp, sq):
        res = []
        for act, tp in out_p[sp]:
            w = act.wire(role_p)
            if role_q not in (w.sender, w.receiver):
                res.append((w, (tp, sq)))
            elif w.sender == role_p:
                for act2, tq in out_q[sq]:
                    if act2.wire(role_q) == w:
                        res.append((w, (tp, tq)))
        for act, tq in out_q[sq]:
            w = act.wire(role_q)
            if role_p not in (w.sender, w.receiver):
                res.append((w, (sp, tq)))
            elif w.sender == role_q:
                for act2, tp in out_p[sp]:
                    if act2.wire(role_p) == w:
                        res.append((w, (tp, tq)))
        return res

    start = (a_p.initial, a_q.initial)
    index = {start: 0}
    states = [start]
    trans = {}
    todo = deque([start])
    while todo:
        pair = todo.popleft()
        for w, nxt in sorted(moves(*pair), key=lambda x: (x[0], x[1])):
            if nxt not in index:
                index[nxt] = len(states)
                states.append(nxt)
                todo.append(nxt)
            trans[(index[pair], w)] = index[nxt]
    return MonitorAutomaton(states, 0, trans, roles=(role_p, role_q))


# Match-action tables


@dataclass(frozen=True)
class IdMap:
    role_ids: dict
    label_ids: dict

    @classmethod
    def build(cls, roles: Iterable[str], labels: Iterable[str]) -> "IdMap":
        roles, labels = sorted(set(roles)), sorted(set(labels))
        if len(roles) > 15:
            raise ValueError(f"{len(roles)} roles; the header has room for 15")
        if len(labels) > 64:
            raise ValueError(f"{len(labels)} labels; the header has room for 64")
        if len(labels) > 63:
            warnings.warn("64 labels uses label id 63, the last free 6-bit value")
        return cls({r: i + 1 for i, r in enumerate(roles)}, {l: i for i, l in enumerate(labels)})

    @cached_property
    def _role_names(self):
        return {v: k for k, v in self.role_ids.items()}

    @cached_property
    def _label_names(self):
        return {v: k for k, v in self.label_ids.items()}

    def role_name(self, rid: int) -> str | None:
        return self._role_names.get(rid)

    def label_name(self, lid: int) -> str | None:
        return self._label_names.get(lid)


@dataclass(frozen=True)
class MatRow:
    state: int
    sender: str
    receiver: str
    label: str
    next_state: int


@dataclass
class MatTable:
    rows: list
    initial: int = 0
    ids: IdMap | None = None
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for r in self.rows:
            key = (r.state, r.sender, r.receiver, r.label)
            if key in self._index:
                raise ValueError(f"duplicate MAT key {key}")
            self._index[key] = r.next_state

    def lookup(self, state, sender, receiver, label) -> int | None:
        return self._index.get((state, sender, receiver, label))

    def has_pair(self, state, sender, receiver) -> bool:
        return any(k[:3] == (state, sender, receiver) for k in self._index)

    def to_text(self) -> str:
        lines = [f"m{r.state} {r.sender} -> {r.receiver} {r.label} accept m{r.next_state}" for r in self.rows]
        lines.append("* reject")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        ids = self.ids
        rows = [{"state": r.state,
                 "sender_id": ids.role_ids[r.sender],
                 "receiver_id": ids.role_ids[r.receiver],
                 "label_id": ids.label_ids[r.label],
                 "action": ["accept", r.next_state]} for r in self.rows]
        return json.dumps({"initial": self.initial, "rows": rows, "default": "reject"}, indent=1, sort_keys=True) + "\n"


def automaton_to_mat(a: MonitorAutomaton, monitored_role: str | None, ids: IdMap) -> MatTable:
    rows = []
    for (s, act), t in a.transitions.items():
        w = act.wire(monitored_role)
        if w.sender == w.receiver:
            raise ValueError(f"row with identical sender and receiver: {w}")
        for r in (w.sender, w.receiver):
            if r not in ids.role_ids:
                raise KeyError(f"role {r!r} missing from id map")
        if w.label not in ids.label_ids:
            raise KeyError(f"label {w.label!r} missing from id map")
        rows.append(MatRow(s, w.sender, w.receiver, w.label, t))
    rows.sort(key=lambda r: (r.state, r.next_state, r.sender, r.receiver, r.label))
    return MatTable(rows, a.initial, ids)


def automaton_text(a: MonitorAutomaton) -> str:
    lines = [f"initial m{a.initial}"]
    for i, s in enumerate(a.states):
        name = s if isinstance(s, tuple) else str(s)
        lines.append(f"m{i} = {name}")
    for (s, act), t in sorted(a.transitions.items(), key=lambda kv: (kv[0][0], kv[1], str(kv[0][1]))):
        lines.append(f"m{s} --{act}--> m{t}")
    return "\n".join(lines) + "\n"
