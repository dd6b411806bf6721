"""N4 PFCP round-trip pairing by 24-bit sequence number.

Requests (P4 send events) wait in a pending table until the response
with the same sequence and the counterpart message type arrives. A
repeated send of a pending sequence marks the transaction retransmitted
but keeps the first-send timestamp; such transactions are excluded from
default statistics because it is ambiguous which copy the response
answers (Karn's algorithm reasoning).

Single-writer: the N4 stream is one socket's syscall trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .codec import (
    MeasurePoint,
    PFCP_SESSION_DELETION_REQUEST,
    PFCP_SESSION_ESTABLISHMENT_REQUEST,
    PFCP_SESSION_MODIFICATION_REQUEST,
    ProbeEvent,
)
from .errors import WrongEventKind

DEFAULT_TIMEOUT_NS = 1_000_000_000

# A 24-bit sequence jumping backwards by more than half the space means
# the peer wrapped or restarted; stale pendings must not corrupt state.
_SEQ_SPACE = 1 << 24
_WRAP_GAP = _SEQ_SPACE // 2


class MsgClass(Enum):
    ESTABLISHMENT = "Establishment"
    MODIFICATION = "Modification"
    DELETION = "Deletion"
    OTHER = "Other"


_CLASS_BY_REQUEST = {
    PFCP_SESSION_ESTABLISHMENT_REQUEST: MsgClass.ESTABLISHMENT,
    PFCP_SESSION_MODIFICATION_REQUEST: MsgClass.MODIFICATION,
    PFCP_SESSION_DELETION_REQUEST: MsgClass.DELETION,
}


def msg_class_for_request(message_type: int) -> MsgClass:
    return _CLASS_BY_REQUEST.get(message_type, MsgClass.OTHER)


@dataclass(frozen=True)
class PfcpTransaction:
    sequence: int
    msg_class: MsgClass
    t_send: int
    t_recv: int
    rtt: int
    retransmitted: bool


@dataclass(frozen=True)
class PfcpAccounting:
    """Conservation ledger: requests == transactions + pending + lost,
    recvs == transactions + orphans. Retransmitted sends of an already
    pending sequence count under retransmits, not requests."""

    requests: int = 0
    retransmits: int = 0
    recvs: int = 0
    transactions: int = 0
    orphans: int = 0
    lost: int = 0
    pending: int = 0


class _Pending:
    __slots__ = ("req_type", "t_send", "retransmitted")

    def __init__(self, req_type, t_send):
        self.req_type = req_type
        self.t_send = t_send
        self.retransmitted = False


class PfcpTracker:
    """Pairs send/recv events on the SMF PFCP socket into transactions."""

    def __init__(self):
        self._pending: dict[int, _Pending] = {}
        self._requests = 0
        self._retransmits = 0
        self._recvs = 0
        self._transactions = 0
        self._orphans = 0
        self._lost = 0
        self._last_send_seq: int | None = None

    def on_event(self, event: ProbeEvent) -> PfcpTransaction | None:
        """Process one P4 event; returns a transaction when a response
        completes a pending request."""
        if event.point is MeasurePoint.PFCP_SEND:
            return self._on_send(event)
        if event.point is MeasurePoint.PFCP_RECV:
            return self._on_recv(event)
        raise WrongEventKind(f"pfcp tracker cannot take {event.point.value} events")

    def _on_send(self, event: ProbeEvent) -> None:
        seq = event.pfcp_seq
        if (self._last_send_seq is not None
                and self._last_send_seq - seq > _WRAP_GAP):
            self._lost += len(self._pending)
            self._pending.clear()
        self._last_send_seq = seq
        pending = self._pending.get(seq)
        if pending is not None:
            pending.retransmitted = True
            self._retransmits += 1
            return None
        self._pending[seq] = _Pending(event.pfcp_msg_type, event.timestamp)
        self._requests += 1
        return None

    def _on_recv(self, event: ProbeEvent) -> PfcpTransaction | None:
        self._recvs += 1
        pending = self._pending.get(event.pfcp_seq)
        # Responses are request type + 1 across the PFCP message space.
        if (pending is None
                or event.pfcp_msg_type != pending.req_type + 1
                or event.timestamp < pending.t_send):
            self._orphans += 1
            return None
        del self._pending[event.pfcp_seq]
        self._transactions += 1
        return PfcpTransaction(
            sequence=event.pfcp_seq,
            msg_class=msg_class_for_request(pending.req_type),
            t_send=pending.t_send,
            t_recv=event.timestamp,
            rtt=event.timestamp - pending.t_send,
            retransmitted=pending.retransmitted,
        )

    def timeout_sweep(self, now: int, timeout: int = DEFAULT_TIMEOUT_NS) -> int:
        """Drop pending requests older than `timeout`, counting them lost.
        Returns how many were dropped; repeating at the same clock drops
        nothing more."""
        stale = [seq for seq, p in self._pending.items()
                 if now - p.t_send > timeout]
        for seq in stale:
            del self._pending[seq]
        self._lost += len(stale)
        return len(stale)

    def accounting(self) -> PfcpAccounting:
        return PfcpAccounting(
            requests=self._requests,
            retransmits=self._retransmits,
            recvs=self._recvs,
            transactions=self._transactions,
            orphans=self._orphans,
            lost=self._lost,
            pending=len(self._pending),
        )
