"""Monitor for session traffic carried over a reliable transport, and a minimal reliable channel.

The monitor tracks a per-(session, sender) sequence number so that retransmitted and
duplicated packets are recognised without touching the session state, and it closes a
session for good once the guarded role sends an in-sequence message with the wrong label.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

from .wire import Kind, Packet, SwitchState


class TcpVerdict(enum.Enum):
    AcceptAdvance = "AcceptAdvance"
    AcceptRetransmit = "AcceptRetransmit"
    RejectDrop = "RejectDrop"
    RejectAndClose = "RejectAndClose"
    PassThroughControl = "PassThroughControl"

    @property
    def accepted(self) -> bool:
        return self in (TcpVerdict.AcceptAdvance, TcpVerdict.AcceptRetransmit, TcpVerdict.PassThroughControl)


@dataclass
class TcpMonState:
    core: SwitchState
    per_session_ssn: dict = field(default_factory=dict)  # (session_id, sender name) -> last accepted ssn
    closed: set = field(default_factory=set)
    receiver_table: frozenset = frozenset()

    def __post_init__(self):
        if not self.receiver_table:
            self.receiver_table = frozenset((r.state, r.sender, r.receiver) for r in self.core.mat.rows)


def tcp_monitor_step(st: TcpMonState, p: Packet, guarded_role: str | Iterable[str]) -> TcpVerdict:
    guarded = {guarded_role} if isinstance(guarded_role, str) else set(guarded_role)
    if p.kind is not Kind.SESSION:
        return TcpVerdict.PassThroughControl
    h = p.header
    if h is None or h.session_id in st.closed:
        return TcpVerdict.RejectDrop
    sender, receiver, label = st.core.names(h)
    key = (h.session_id, sender)
    stored = st.per_session_ssn.get(key, 0)
    if h.ssn <= stored:
        return TcpVerdict.AcceptRetransmit
    cur = st.core.state_of(h.session_id)
    if (cur, sender, receiver) not in st.receiver_table:
        return TcpVerdict.RejectDrop
    outgoing = sender in guarded
    nxt = st.core.mat.lookup(cur, sender, receiver, label)
    if nxt is None:
        if outgoing and h.ssn == stored + 1:
            st.closed.add(h.session_id)
            return TcpVerdict.RejectAndClose
        return TcpVerdict.RejectDrop
    if outgoing and h.ssn != stored + 1:
        # a gap means earlier packets were lost; wait for their retransmission
        return TcpVerdict.RejectDrop
    st.core.per_session[h.session_id] = nxt
    st.per_session_ssn[key] = h.ssn
    return TcpVerdict.AcceptAdvance


# Reliable channel: one per (session, source host, destination host)


@dataclass
class ChannelSender:
    rto_us: int = 200_000
    max_tries: int = 5
    next_seq: int = 0
    unacked: dict = field(default_factory=dict)  # seq -> [packet, tries, current rto]
    failed: bool = False
    retransmissions: int = 0


@dataclass
class ChannelReceiver:
    expected: int = 0
    buffer: dict = field(default_factory=dict)  # seq -> packet


@dataclass(frozen=True)
class SendData:
    packet: Packet


@dataclass(frozen=True)
class AckArrived:
    ack: int


@dataclass(frozen=True)
class Timeout:
    seq: int


@dataclass(frozen=True)
class DataArrived:
    packet: Packet


@dataclass(frozen=True)
class Transmit:
    packet: Packet
    retransmission: bool = False


@dataclass(frozen=True)
class ScheduleTimeout:
    seq: int
    delay_us: int


@dataclass(frozen=True)
class Deliver:
    packet: Packet


@dataclass(frozen=True)
class SendAck:
    ack: int


@dataclass(frozen=True)
class GiveUp:
    seq: int


def reliable_channel_step(state: ChannelSender | ChannelReceiver, event) -> list:
    """Advance one end of a reliable channel and return the actions it asks the host to take."""
    if isinstance(state, ChannelSender):
        if isinstance(event, SendData):
            seq = state.next_seq
            state.next_seq += 1
            pkt = Packet(event.packet.header, event.packet.payload, event.packet.kind, seq=seq)
            state.unacked[seq] = [pkt, 1, state.rto_us]
            return [Transmit(pkt), ScheduleTimeout(seq, state.rto_us)]
        if isinstance(event, AckArrived):
            for seq in [s for s in state.unacked if s < event.ack]:
                del state.unacked[seq]
            return []
        if isinstance(event, Timeout):
            entry = state.unacked.get(event.seq)
            if entry is None or state.failed:
                return []
            pkt, tries, rto = entry
            if tries >= state.max_tries:
                state.failed = True
                return [GiveUp(event.seq)]
            entry[1], entry[2] = tries + 1, rto * 2
            state.retransmissions += 1
            return [Transmit(pkt, retransmission=True), ScheduleTimeout(event.seq, rto * 2)]
        raise TypeError(f"sender cannot handle {event!r}")
    if isinstance(event, DataArrived):
        seq = event.packet.seq
        out = []
        if seq >= state.expected and seq not in state.buffer:
            state.buffer[seq] = event.packet
            while state.expected in state.buffer:
                out.append(Deliver(state.buffer.pop(state.expected)))
                state.expected += 1
        out.append(SendAck(state.expected))
        return out
    raise TypeError(f"receiver cannot handle {event!r}")
