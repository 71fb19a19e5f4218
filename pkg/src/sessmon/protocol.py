"""Protocol bundles: a named set of role types read from a small text format.

    protocol NAME
    initiator ROLE
    sorts int str ...
    role ROLE = <session type, may span lines>

Lines starting with `//` are comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .st_core import (
    DEFAULT_SORTS, IntChoice, SessionType, SessionTypeError, messages_of, parse_session_type,
    roles_of, unfold,
)

CORPUS = ("bookinfo", "store", "vpn", "firewall", "dns", "auction", "cdn", "sip", "pop3", "game")


@dataclass
class Protocol:
    name: str
    roles: dict  # role -> SessionType, in file order
    initiator: str
    sorts: tuple = DEFAULT_SORTS
    sources: dict = field(default_factory=dict)

    @property
    def role_names(self) -> list[str]:
        return sorted(self.roles)

    @property
    def labels(self) -> list[str]:
        return sorted({m[2] for t in self.roles.values() for m in messages_of(t)})

    def starts_with_send(self, role: str) -> bool:
        return isinstance(unfold(self.roles[role]), IntChoice)


_HEADER = re.compile(r"^(protocol|initiator|sorts|role)\b\s*(.*)$")


def parse_protocol(text: str, origin: str = "<text>") -> Protocol:
    name, initiator, sorts = None, None, DEFAULT_SORTS
    roles: dict[str, list[str]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("//", 1)[0].rstrip()
        if not line.strip():
            continue
        m = _HEADER.match(line)
        if m is None:
            if current is None:
                raise SessionTypeError(f"{origin}:{lineno}: expected a header line")
            roles[current].append(line)
            continue
        kw, rest = m.groups()
        current = None
        if kw == "protocol":
            name = rest.strip()
        elif kw == "initiator":
            initiator = rest.strip()
        elif kw == "sorts":
            sorts = tuple(rest.replace(",", " ").split())
        else:
            rm = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$", rest)
            if rm is None:
                raise SessionTypeError(f"{origin}:{lineno}: expected 'role NAME = type'")
            current = rm.group(1)
            if current in roles:
                raise SessionTypeError(f"{origin}:{lineno}: role {current!r} defined twice")
            roles[current] = [rm.group(2)]
    if name is None:
        raise SessionTypeError(f"{origin}: missing 'protocol' line")
    types, sources = {}, {}
    for role, lines in roles.items():
        src = "\n".join(lines)
        try:
            types[role] = parse_session_type(src, sorts)
        except SessionTypeError as e:
            raise SessionTypeError(f"{origin}: role {role}: {e}") from None
        sources[role] = src
    proto = Protocol(name, types, initiator or next(iter(types)), sorts, sources)
    check_protocol(proto)
    return proto


def check_protocol(p: Protocol) -> None:
    if len(p.roles) > 15:
        raise SessionTypeError(f"{p.name}: {len(p.roles)} roles, at most 15 fit the header")
    if len(p.labels) > 64:
        raise SessionTypeError(f"{p.name}: {len(p.labels)} labels, at most 64 fit the header")
    if p.initiator not in p.roles:
        raise SessionTypeError(f"{p.name}: initiator {p.initiator!r} is not a role")
    if not p.starts_with_send(p.initiator):
        raise SessionTypeError(f"{p.name}: initiator {p.initiator!r} must start by sending")
    for role, t in p.roles.items():
        peers = roles_of(t)
        if role in peers:
            raise SessionTypeError(f"{p.name}: role {role} talks to itself")
        unknown = peers - set(p.roles)
        if unknown:
            raise SessionTypeError(f"{p.name}: role {role} mentions unknown roles {sorted(unknown)}")
    sort_of = {}
    for t in p.roles.values():
        for _, _, label, sort in messages_of(t):
            if sort_of.setdefault(label, sort) != sort:
                raise SessionTypeError(f"{p.name}: label {label!r} used with sorts {sort_of[label]} and {sort}")


def load_protocol(name_or_path: str) -> Protocol:
    """Load a corpus bundle by name (e.g. 'bookinfo') or a protocol file by path."""
    path = Path(name_or_path)
    if path.suffix == ".proto" or path.exists():
        return parse_protocol(path.read_text(), str(path))
    fname = name_or_path.lower() + ".proto"
    res = resources.files("sessmon") / "corpus" / fname
    if not res.is_file():
        raise FileNotFoundError(f"no protocol named {name_or_path!r}")
    return parse_protocol(res.read_text(), fname)
