"""Reference implementations the tests compare the package against.

They are deliberately naive: brute force over small spaces, string-level bit packing,
and a second, separately written version of the monitor acceptance rules.
"""

from __future__ import annotations

import random
from collections import deque

from sessmon.st_core import (
    END, End, ExtChoice, IntChoice, QueuedMsg, Rec, RecvBranch, SendBranch, Var, canonical,
    substitute,
)

# Header layout as (field, width) from the most significant bit down
HEADER_FIELDS = (("msg_size", 8), ("session_id", 10), ("label_id", 6),
                 ("sender_id", 4), ("receiver_id", 4), ("ssn", 16))


def pack_header_bits(**fields) -> bytes:
    bits = "".join(format(fields.get(name, 0), f"0{w}b") for name, w in HEADER_FIELDS)
    assert len(bits) == 48
    return int(bits, 2).to_bytes(6, "big")


def swap_closure(q: tuple) -> set:
    """All queues reachable by swapping adjacent messages from different senders."""
    seen = {q}
    todo = deque([q])
    while todo:
        cur = todo.popleft()
        for i in range(len(cur) - 1):
            if cur[i].sender != cur[i + 1].sender:
                nxt = cur[:i] + (cur[i + 1], cur[i]) + cur[i + 2:]
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
    return seen


def random_congruent(q: tuple, rng: random.Random, swaps: int = 20) -> tuple:
    q = list(q)
    for _ in range(swaps):
        if len(q) < 2:
            break
        i = rng.randrange(len(q) - 1)
        if q[i].sender != q[i + 1].sender:
            q[i], q[i + 1] = q[i + 1], q[i]
    return tuple(q)


# A second implementation of monitor acceptance, written against the rules directly


def _unf(t):
    while isinstance(t, Rec):
        t = substitute(t.body, t.var, t)
    return t


def oracle_accept_send(t, q, label, sort):
    t = _unf(t)
    if not isinstance(t, IntChoice):
        return None
    hits = [b.cont for b in t.branches if (b.recipient, b.label, b.sort) == (q, label, sort)]
    return canonical(hits[0]) if hits else None


def oracle_accept_enqueue(t, p, label, sort, seen=frozenset(), budget=300):
    if budget == 0:
        raise RecursionError("oracle budget exhausted")
    t = _unf(t)
    key = canonical(t)
    if key in seen:
        return None
    seen = seen | {key}
    if isinstance(t, ExtChoice) and t.sender == p:
        hits = [b.cont for b in t.branches if (b.label, b.sort) == (label, sort)]
        return canonical(hits[0]) if hits else None
    if isinstance(t, ExtChoice):
        kept = []
        for b in t.branches:
            r = oracle_accept_enqueue(b.cont, p, label, sort, seen, budget - 1)
            if r is not None:
                kept.append(RecvBranch(b.label, b.sort, r))
        return canonical(ExtChoice(t.sender, tuple(kept))) if kept else None
    if isinstance(t, IntChoice):
        if p in {b.recipient for b in t.branches}:
            return None
        kept = []
        for b in t.branches:
            r = oracle_accept_enqueue(b.cont, p, label, sort, seen, budget - 1)
            if r is not None:
                kept.append(SendBranch(b.recipient, b.label, b.sort, r))
        return canonical(IntChoice(tuple(kept))) if kept else None
    return None


def _prefixes(t, acc=None, seen=None):
    acc = set() if acc is None else acc
    seen = set() if seen is None else seen
    t = _unf(t)
    if canonical(t) in seen:
        return acc
    seen.add(canonical(t))
    if isinstance(t, IntChoice):
        for b in t.branches:
            acc.add(("!", b.recipient, b.label, b.sort))
            _prefixes(b.cont, acc, seen)
    elif isinstance(t, ExtChoice):
        for b in t.branches:
            acc.add(("?", t.sender, b.label, b.sort))
            _prefixes(b.cont, acc, seen)
    return acc


def oracle_monitor_states(t, cap: int = 100_000) -> tuple[int, int]:
    """(states, transitions) of the monitor automaton, by plain BFS over the oracle rules."""
    acts = sorted(_prefixes(t))
    start = canonical(t)
    seen = {start}
    todo = deque([start])
    edges = 0
    while todo:
        s = todo.popleft()
        for d, peer, label, sort in acts:
            nxt = oracle_accept_send(s, peer, label, sort) if d == "!" else \
                oracle_accept_enqueue(s, peer, label, sort)
            if nxt is None:
                continue
            edges += 1
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
                if len(seen) > cap:
                    raise RuntimeError("state cap")
    return len(seen), edges


# Brute-force product of two monitor automata


def oracle_compose(a_p, role_p, a_q, role_q):
    """Reachable states and labelled edges of the synchronised product, by enumeration."""
    def wire(act, role):
        return act.wire(role)

    out_p, out_q = a_p.out_edges(), a_q.out_edges()
    start = (a_p.initial, a_q.initial)
    seen = {start}
    edges = set()
    todo = [start]
    while todo:
        sp, sq = todo.pop()
        cand = []
        for act, tp in out_p[sp]:
            w = wire(act, role_p)
            shared = {w.sender, w.receiver} == {role_p, role_q}
            if not shared:
                cand.append((w, (tp, sq)))
        for act, tq in out_q[sq]:
            w = wire(act, role_q)
            shared = {w.sender, w.receiver} == {role_p, role_q}
            if not shared:
                cand.append((w, (sp, tq)))
        for act, tp in out_p[sp]:
            for act2, tq in out_q[sq]:
                w1, w2 = wire(act, role_p), wire(act2, role_q)
                if w1 == w2 and {w1.sender, w1.receiver} == {role_p, role_q}:
                    cand.append((w1, (tp, tq)))
        for w, nxt in cand:
            edges.add(((sp, sq), w, nxt))
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return seen, edges


# Random session types


def random_type(rng: random.Random, me: str = "m", peers=("p", "q", "r"), labels=("a", "b", "c"),
                depth: int = 4, rec_vars=(), allow_rec: bool = True):
    opts = ["end", "int", "ext"]
    if rec_vars:
        opts.append("var")
    if allow_rec and depth > 1:
        opts.append("rec")
    if depth <= 0:
        opts = ["end"] + (["var"] if rec_vars else [])
    kind = rng.choice(opts)
    if kind == "end":
        return END
    if kind == "var":
        return Var(rng.choice(rec_vars))
    if kind == "rec":
        name = f"R{len(rec_vars)}"
        body = _choice(rng, me, peers, labels, depth - 1, rec_vars + (name,), allow_rec)
        return Rec(name, body)
    return _choice(rng, me, peers, labels, depth - 1, rec_vars, allow_rec, kind)


def _choice(rng, me, peers, labels, depth, rec_vars, allow_rec, kind=None):
    kind = kind or rng.choice(["int", "ext"])
    n = rng.randint(1, 2)
    if kind == "int":
        keys = rng.sample([(p, l) for p in peers for l in labels], n)
        return IntChoice(tuple(SendBranch(p, l, "int", random_type(rng, me, peers, labels, depth, rec_vars, allow_rec))
                               for p, l in keys))
    sender = rng.choice(peers)
    return ExtChoice(sender, tuple(RecvBranch(l, "int", random_type(rng, me, peers, labels, depth, rec_vars, allow_rec))
                                   for l in rng.sample(labels, n)))


def random_queue(rng: random.Random, peers=("p", "q", "r"), labels=("a", "b", "c"), max_len: int = 4) -> tuple:
    return tuple(QueuedMsg(rng.choice(peers), rng.choice(labels), "int") for _ in range(rng.randint(0, max_len)))


def is_end(t) -> bool:
    return isinstance(_unf(t), End)


# Property checks shared by the unit tests and the acceptance suite


def congruence_mismatch(rng: random.Random):
    """A random (type, queue, congruent queue) whose monitor states differ, or None if they agree."""
    from sessmon.monitor import monitor_queue_state
    t = random_type(rng, depth=5)
    q1 = random_queue(rng, max_len=5)
    q2 = random_congruent(q1, rng)
    return None if monitor_queue_state(t, q1) == monitor_queue_state(t, q2) else (t, q1, q2)


def mirroring_walk(t, rng: random.Random, steps: int = 25) -> bool:
    """Every input/output step of the type is matched by the monitor, landing on the encoded target."""
    from sessmon.monitor import accept_enqueue, accept_send
    from sessmon.st_core import In, Out, type_transitions
    m = canonical(t)
    cur = t
    for _ in range(steps):
        moves = type_transitions(cur)
        if not moves:
            return True
        for lab, nxt in moves:
            if isinstance(lab, Out):
                got = accept_send(m, lab.recipient, lab.label, lab.sort)
            else:
                assert isinstance(lab, In)
                got = accept_enqueue(m, lab.sender, lab.label, lab.sort)
            if got != canonical(nxt):
                return False
        lab, cur = rng.choice(moves)
        m = canonical(cur)
    return True


def send_inversion_case(rng: random.Random) -> bool:
    """A send the monitor accepts is a send the (pruned) type can perform, with the same continuation."""
    from sessmon.monitor import accept, candidate_actions, AccSend
    from sessmon.st_core import Out, type_transitions
    t = random_type(rng, depth=5)
    m = canonical(t)
    acts = candidate_actions(t)
    for _ in range(rng.randint(0, 4)):
        nexts = [(a, accept(m, a)) for a in acts]
        nexts = [(a, n) for a, n in nexts if n is not None]
        if not nexts:
            break
        m = rng.choice(nexts)[1]
    for a in acts:
        if not isinstance(a, AccSend):
            continue
        got = accept(m, a)
        if got is None:
            continue
        outs = {(lab.recipient, lab.label, lab.sort): canonical(nxt)
                for lab, nxt in type_transitions(m) if isinstance(lab, Out)}
        if outs.get((a.recipient, a.label, a.sort)) != got:
            return False
    return True


# Naive bisimilarity: greatest fixpoint over all state pairs


def oracle_bisimilar(g1, g2) -> bool:
    rel = {(i, j) for i in range(len(g1)) for j in range(len(g2))}
    changed = True
    while changed:
        changed = False
        for i, j in list(rel):
            fwd = all(any(l2 == l1 and (a, b) in rel for l2, b in g2.edges[j]) for l1, a in g1.edges[i])
            bwd = all(any(l1 == l2 and (a, b) in rel for l1, a in g1.edges[i]) for l2, b in g2.edges[j])
            if not (fwd and bwd):
                rel.discard((i, j))
                changed = True
    return (0, 0) in rel
