"""Session-type terms, the textual DSL, and the LTS of types and typed endpoints."""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Union

DEFAULT_SORTS = ("int", "str", "bool", "float")
MAX_ROLES = 15
MAX_LABELS = 64

# monitor terms may nest a few hundred levels before synthesis gives up on them
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))


class SessionTypeError(ValueError):
    pass


# Terms. Hashes are computed once at construction so that deep terms stay cheap
# to use as dictionary keys during synthesis and exploration.


class _Term:
    __slots__ = ()

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        # iterative so that deeply nested monitor terms do not hit the recursion limit
        stack = [(self, other)]
        while stack:
            a, b = stack.pop()
            if a is b:
                continue
            if type(a) is not type(b) or a._hash != b._hash:
                return False
            if isinstance(a, Var):
                if a.name != b.name:
                    return False
            elif isinstance(a, Rec):
                if a.var != b.var:
                    return False
                stack.append((a.body, b.body))
            elif isinstance(a, (IntChoice, ExtChoice)):
                if len(a.branches) != len(b.branches):
                    return False
                if isinstance(a, ExtChoice) and a.sender != b.sender:
                    return False
                for x, y in zip(a.branches, b.branches):
                    if x.label != y.label or x.sort != y.sort:
                        return False
                    if isinstance(x, SendBranch) and x.recipient != y.recipient:
                        return False
                    stack.append((x.cont, y.cont))
        return True

    def __str__(self):
        return pretty(self)


@dataclass(frozen=True, eq=False)
class End(_Term):
    _hash: int = field(init=False, repr=False, compare=False)
    depth: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash("end"))
        object.__setattr__(self, "depth", 0)

    def _key(self):
        return ()


@dataclass(frozen=True, eq=False)
class Var(_Term):
    name: str
    _hash: int = field(init=False, repr=False, compare=False)
    depth: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("var", self.name)))
        object.__setattr__(self, "depth", 0)

    def _key(self):
        return (self.name,)


@dataclass(frozen=True, eq=False)
class Rec(_Term):
    var: str
    body: "SessionType"
    _hash: int = field(init=False, repr=False, compare=False)
    depth: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash(("rec", self.var, self.body)))
        object.__setattr__(self, "depth", self.body.depth + 1)

    def _key(self):
        return (self.var, self.body)


@dataclass(frozen=True)
class SendBranch:
    recipient: str
    label: str
    sort: str
    cont: "SessionType"


@dataclass(frozen=True)
class RecvBranch:
    label: str
    sort: str
    cont: "SessionType"


@dataclass(frozen=True, eq=False)
class IntChoice(_Term):
    branches: tuple[SendBranch, ...]
    _hash: int = field(init=False, repr=False, compare=False)
    depth: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "_hash", hash(("int", self.branches)))
        object.__setattr__(self, "depth", 1 + max(b.cont.depth for b in self.branches) if self.branches else 0)

    def _key(self):
        return (self.branches,)


@dataclass(frozen=True, eq=False)
class ExtChoice(_Term):
    sender: str
    branches: tuple[RecvBranch, ...]
    _hash: int = field(init=False, repr=False, compare=False)
    depth: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "_hash", hash(("ext", self.sender, self.branches)))
        object.__setattr__(self, "depth", 1 + max(b.cont.depth for b in self.branches) if self.branches else 0)

    def _key(self):
        return (self.sender, self.branches)


SessionType = Union[End, Var, Rec, IntChoice, ExtChoice]
END = End()


def send(recipient, label, sort, cont=END) -> IntChoice:
    return IntChoice((SendBranch(recipient, label, sort, cont),))


def recv(sender, label, sort, cont=END) -> ExtChoice:
    return ExtChoice(sender, (RecvBranch(label, sort, cont),))


# Substitution, unfolding, canonical form


def substitute(t: SessionType, name: str, s: SessionType) -> SessionType:
    """t[name := s], assuming s is closed (so no capture can occur)."""
    if isinstance(t, Var):
        return s if t.name == name else t
    if isinstance(t, End):
        return t
    if isinstance(t, Rec):
        if t.var == name:
            return t
        return Rec(t.var, substitute(t.body, name, s))
    if isinstance(t, IntChoice):
        return IntChoice(tuple(SendBranch(b.recipient, b.label, b.sort, substitute(b.cont, name, s))
                               for b in t.branches))
    return ExtChoice(t.sender, tuple(RecvBranch(b.label, b.sort, substitute(b.cont, name, s))
                                     for b in t.branches))


def unfold(t: SessionType) -> SessionType:
    while isinstance(t, Rec):
        t = substitute(t.body, t.var, t)
    return t


def _canon(t, env, depth):
    if isinstance(t, End):
        return t
    if isinstance(t, Var):
        return Var(env.get(t.name, t.name))
    if isinstance(t, Rec):
        name = f"X{depth}"
        return Rec(name, _canon(t.body, {**env, t.var: name}, depth + 1))
    if isinstance(t, IntChoice):
        bs = [SendBranch(b.recipient, b.label, b.sort, _canon(b.cont, env, depth)) for b in t.branches]
        bs.sort(key=lambda b: (b.recipient, b.label, b.sort))
        return IntChoice(tuple(bs))
    bs = [RecvBranch(b.label, b.sort, _canon(b.cont, env, depth)) for b in t.branches]
    bs.sort(key=lambda b: (b.label, b.sort))
    return ExtChoice(t.sender, tuple(bs))


@lru_cache(maxsize=None)
def canonical(t: SessionType) -> SessionType:
    """Alpha-normalised form: binders named by nesting depth, branches sorted."""
    return _canon(t, {}, 0)


def alpha_equal(a: SessionType, b: SessionType) -> bool:
    return canonical(a) == canonical(b)


# Validation


def free_vars(t: SessionType) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, End):
        return set()
    if isinstance(t, Rec):
        return free_vars(t.body) - {t.var}
    return set().union(*(free_vars(b.cont) for b in t.branches))


def _check(t, bound, unguarded, sorts):
    if isinstance(t, Var):
        if t.name not in bound:
            raise SessionTypeError(f"unbound recursion variable {t.name!r}")
        if t.name in unguarded:
            raise SessionTypeError(f"unguarded recursion on {t.name!r}")
        return
    if isinstance(t, End):
        return
    if isinstance(t, Rec):
        _check(t.body, bound | {t.var}, unguarded | {t.var}, sorts)
        return
    if not t.branches:
        raise SessionTypeError("empty choice")
    if isinstance(t, IntChoice):
        keys = [(b.recipient, b.label) for b in t.branches]
    else:
        keys = [b.label for b in t.branches]
    dup = {k for k in keys if keys.count(k) > 1}
    if dup:
        raise SessionTypeError(f"duplicate label in choice: {sorted(dup)!r}")
    for b in t.branches:
        if sorts is not None and b.sort not in sorts:
            raise SessionTypeError(f"unknown sort {b.sort!r}")
        _check(b.cont, bound, frozenset(), sorts)


def validate(t: SessionType, sorts: Iterable[str] | None = None) -> SessionType:
    """Raise SessionTypeError unless t is closed, guarded and has distinct labels per choice."""
    _check(t, frozenset(), frozenset(), None if sorts is None else set(sorts))
    return t


def roles_of(t: SessionType) -> set[str]:
    if isinstance(t, (End, Var)):
        return set()
    if isinstance(t, Rec):
        return roles_of(t.body)
    out = set() if isinstance(t, IntChoice) else {t.sender}
    for b in t.branches:
        if isinstance(b, SendBranch):
            out.add(b.recipient)
        out |= roles_of(b.cont)
    return out


def messages_of(t: SessionType) -> set[tuple[str, str, str, str]]:
    """All (direction, peer, label, sort) prefixes occurring in t; direction is '!' or '&'."""
    if isinstance(t, (End, Var)):
        return set()
    if isinstance(t, Rec):
        return messages_of(t.body)
    out = set()
    for b in t.branches:
        if isinstance(b, SendBranch):
            out.add(("!", b.recipient, b.label, b.sort))
        else:
            out.add(("&", t.sender, b.label, b.sort))
        out |= messages_of(b.cont)
    return out


# DSL

_TOKEN = re.compile(r"\s+|//[^\n]*|(?P<ident>[A-Za-z_][A-Za-z0-9_']*)|(?P<sym>[+{}(),.!&])")


def _tokenize(text: str):
    pos, toks = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise SessionTypeError(f"syntax error at {_where(text, pos)}: unexpected {text[pos]!r}")
        if m.lastgroup:
            toks.append((m.group(m.lastgroup), pos))
        pos = m.end()
    toks.append(("<eof>", len(text)))
    return toks


def _where(text, pos):
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return f"line {line}, column {col}"


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)][0]

    def error(self, msg):
        tok, pos = self.toks[self.i]
        raise SessionTypeError(f"syntax error at {_where(self.text, pos)}: {msg}, got {tok!r}")

    def take(self, expected=None):
        tok = self.peek()
        if expected is not None and tok != expected:
            self.error(f"expected {expected!r}")
        self.i += 1
        return tok

    def ident(self, what):
        tok = self.peek()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", tok):
            self.error(f"expected {what}")
        self.i += 1
        return tok

    def type_(self):
        tok = self.peek()
        if tok == "end":
            self.take()
            return END
        if tok == "rec":
            self.take()
            var = self.ident("recursion variable")
            self.take(".")
            return Rec(var, self.type_())
        if tok == "+":
            self.take()
            self.take("{")
            branches = [self.send_branch()]
            while self.peek() == ",":
                self.take()
                branches.append(self.send_branch())
            self.take("}")
            return IntChoice(tuple(branches))
        name = self.ident("type")
        if self.peek() == "!":
            self.i -= 1
            return IntChoice((self.send_branch(),))
        if self.peek() == "&":
            self.take()
            if self.peek() == "{":
                self.take()
                branches = [self.recv_branch()]
                while self.peek() == ",":
                    self.take()
                    branches.append(self.recv_branch())
                self.take("}")
            else:
                branches = [self.recv_branch()]
            return ExtChoice(name, tuple(branches))
        return Var(name)

    def payload(self):
        label = self.ident("label")
        self.take("(")
        sort = self.ident("sort")
        self.take(")")
        self.take(".")
        return label, sort

    def send_branch(self):
        role = self.ident("role")
        self.take("!")
        label, sort = self.payload()
        return SendBranch(role, label, sort, self.type_())

    def recv_branch(self):
        label, sort = self.payload()
        return RecvBranch(label, sort, self.type_())


def parse_session_type(text: str, sorts: Iterable[str] | None = DEFAULT_SORTS) -> SessionType:
    p = _Parser(text)
    t = p.type_()
    if p.peek() != "<eof>":
        p.error("trailing input")
    return validate(t, sorts)


def pretty(t: SessionType) -> str:
    if isinstance(t, End):
        return "end"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Rec):
        return f"rec {t.var}. {pretty(t.body)}"
    if isinstance(t, IntChoice):
        parts = [f"{b.recipient}!{b.label}({b.sort}).{pretty(b.cont)}" for b in t.branches]
        return parts[0] if len(parts) == 1 else "+{" + ", ".join(parts) + "}"
    parts = [f"{b.label}({b.sort}).{pretty(b.cont)}" for b in t.branches]
    return f"{t.sender}&" + (parts[0] if len(parts) == 1 else "{" + ", ".join(parts) + "}")


# Queues


@dataclass(frozen=True)
class QueuedMsg:
    sender: str
    label: str
    sort: str

    def __str__(self):
        return f"<{self.sender},{self.label}({self.sort})>"


InputQueue = tuple  # tuple[QueuedMsg, ...]


def projection(q: Iterable[QueuedMsg]) -> dict[str, tuple[QueuedMsg, ...]]:
    out: dict[str, list] = {}
    for m in q:
        out.setdefault(m.sender, []).append(m)
    return {k: tuple(v) for k, v in out.items()}


def queue_equiv(q1: Iterable[QueuedMsg], q2: Iterable[QueuedMsg]) -> bool:
    """Equal modulo swapping adjacent messages from different senders."""
    return projection(q1) == projection(q2)


def canonical_queue(q: Iterable[QueuedMsg]) -> tuple[QueuedMsg, ...]:
    """Representative of the congruence class: messages grouped by sender, senders sorted."""
    proj = projection(q)
    return tuple(m for s in sorted(proj) for m in proj[s])


def oldest_from(q: Iterable[QueuedMsg], sender: str) -> tuple[int, QueuedMsg] | None:
    for i, m in enumerate(q):
        if m.sender == sender:
            return i, m
    return None


# Action labels


@dataclass(frozen=True)
class Out:
    recipient: str
    label: str
    sort: str


@dataclass(frozen=True)
class In:
    sender: str
    label: str
    sort: str


@dataclass(frozen=True)
class Send:
    recipient: str
    label: str
    sort: str


@dataclass(frozen=True)
class Enqueue:
    sender: str
    label: str
    sort: str


@dataclass(frozen=True)
class Deq:
    sender: str
    label: str
    sort: str


@dataclass(frozen=True)
class EndpointConfig:
    ty: SessionType
    queue: tuple = ()


def type_transitions(t: SessionType) -> list[tuple[Out | In, SessionType]]:
    u = unfold(t)
    if isinstance(u, IntChoice):
        return [(Out(b.recipient, b.label, b.sort), b.cont) for b in u.branches]
    if isinstance(u, ExtChoice):
        return [(In(u.sender, b.label, b.sort), b.cont) for b in u.branches]
    return []


def deq_transition(c: EndpointConfig) -> tuple[Deq, EndpointConfig] | None:
    u = unfold(c.ty)
    if not isinstance(u, ExtChoice):
        return None
    hit = oldest_from(c.queue, u.sender)
    if hit is None:
        return None
    i, m = hit
    for b in u.branches:
        if b.label == m.label and b.sort == m.sort:
            return Deq(m.sender, m.label, m.sort), EndpointConfig(b.cont, c.queue[:i] + c.queue[i + 1:])
    return None


def config_transitions(c: EndpointConfig, universe: Iterable[QueuedMsg] = ()):
    """Send and Deq moves of the endpoint, plus Enqueue for every message in `universe`."""
    out = []
    u = unfold(c.ty)
    if isinstance(u, IntChoice):
        for b in u.branches:
            out.append((Send(b.recipient, b.label, b.sort), EndpointConfig(b.cont, c.queue)))
    d = deq_transition(c)
    if d is not None:
        out.append(d)
    for m in universe:
        out.append((Enqueue(m.sender, m.label, m.sort), EndpointConfig(c.ty, c.queue + (m,))))
    return out


def protocol_universe(roles: Iterable[str], labels: Iterable[str], sorts: Iterable[str]) -> list[QueuedMsg]:
    return [QueuedMsg(r, l, s) for r in sorted(roles) for l in sorted(labels) for s in sorted(sorts)]
