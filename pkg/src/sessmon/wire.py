"""Session header codec, packets, and the per-packet logic of a border monitor switch."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .monitor import IdMap, MatTable

HEADER_LEN = 6

_WIDTHS = {"msg_size": 8, "session_id": 10, "label_id": 6, "sender_id": 4, "receiver_id": 4, "ssn": 16}


class HeaderError(ValueError):
    pass


@dataclass(frozen=True)
class SessionHeader:
    msg_size: int = 0
    session_id: int = 0
    label_id: int = 0
    sender_id: int = 0
    receiver_id: int = 0
    ssn: int = 0

    def __post_init__(self):
        for name, bits in _WIDTHS.items():
            v = getattr(self, name)
            if not isinstance(v, int) or not 0 <= v < (1 << bits):
                raise HeaderError(f"{name}={v!r} does not fit in {bits} bits")


def encode_header(h: SessionHeader) -> bytes:
    return bytes((
        h.msg_size,
        h.session_id >> 2,
        ((h.session_id & 0b11) << 6) | h.label_id,
        (h.sender_id << 4) | h.receiver_id,
        h.ssn >> 8,
        h.ssn & 0xFF,
    ))


def decode_header(data: bytes) -> SessionHeader:
    if len(data) < HEADER_LEN:
        raise HeaderError(f"need {HEADER_LEN} bytes, got {len(data)}")
    b = data[:HEADER_LEN]
    return SessionHeader(
        msg_size=b[0],
        session_id=(b[1] << 2) | (b[2] >> 6),
        label_id=b[2] & 0x3F,
        sender_id=b[3] >> 4,
        receiver_id=b[3] & 0x0F,
        ssn=(b[4] << 8) | b[5],
    )


class Kind(enum.Enum):
    SESSION = "Session"
    SYN = "Syn"
    FIN = "Fin"
    ACK = "PureAck"


@dataclass(frozen=True)
class Packet:
    """A packet on the simulated wire.

    `seq` and `ack` are transport fields of the reliable channel (absent on plain datagrams);
    monitors only read the session header and `kind`.
    """
    header: SessionHeader | None
    payload: bytes = b""
    kind: Kind = Kind.SESSION
    seq: int = 0
    ack: int = 0

    def to_bytes(self) -> bytes:
        return (encode_header(self.header) if self.header else b"") + self.payload


def make_packet(ids: IdMap, session_id: int, sender: str, receiver: str, label: str, ssn: int = 0,
                kind: Kind = Kind.SESSION, seq: int = 0, ack: int = 0) -> Packet:
    payload = label.encode()[:255] if kind is Kind.SESSION else b""
    h = SessionHeader(len(payload), session_id, ids.label_ids.get(label, 0),
                      ids.role_ids[sender], ids.role_ids[receiver], ssn)
    return Packet(h, payload, kind, seq, ack)


# UDP border monitor


@dataclass
class SwitchState:
    mat: MatTable
    ids: IdMap
    per_session: dict = field(default_factory=dict)

    def state_of(self, session_id: int) -> int:
        return self.per_session.get(session_id, self.mat.initial)

    def names(self, h: SessionHeader):
        return self.ids.role_name(h.sender_id), self.ids.role_name(h.receiver_id), self.ids.label_name(h.label_id)


@dataclass(frozen=True)
class Accept:
    state: int


@dataclass(frozen=True)
class Reject:
    reason: str = ""


def monitor_packet(sw: SwitchState, p: Packet) -> Accept | Reject:
    """Accept (advancing the session's register) or reject; a reject leaves the state unchanged."""
    if p.header is None or p.kind is not Kind.SESSION:
        return Reject("no session header")
    h = p.header
    sender, receiver, label = sw.names(h)
    cur = sw.state_of(h.session_id)
    nxt = sw.mat.lookup(cur, sender, receiver, label)
    if nxt is None:
        return Reject(f"no row for m{cur} {sender} -> {receiver} {label}")
    sw.per_session[h.session_id] = nxt
    return Accept(nxt)
