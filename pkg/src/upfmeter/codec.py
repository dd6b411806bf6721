"""Wire-format and trace-line codecs.

Parses the three formats the measurement pipeline sees on the wire
(GTP-U outer header, inner IPv4 five-tuple, PFCP header) and the
one-line-per-event trace format the kernel probes emit.

All functions here are pure: no shared state, safe from any number of
concurrent callers.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from enum import Enum

from .errors import (
    InvalidEvent,
    MalformedLine,
    NotGpdu,
    TruncatedHeader,
    TruncatedPacket,
    UnknownVersion,
    UnsupportedIpVersion,
    UnsupportedVersion,
)

GTPU_MSG_GPDU = 0xFF

PFCP_SESSION_ESTABLISHMENT_REQUEST = 50
PFCP_SESSION_ESTABLISHMENT_RESPONSE = 51
PFCP_SESSION_MODIFICATION_REQUEST = 52
PFCP_SESSION_MODIFICATION_RESPONSE = 53
PFCP_SESSION_DELETION_REQUEST = 54
PFCP_SESSION_DELETION_RESPONSE = 55

# PFCP message types that carry a SEID (session-scoped, TS 29.244 range).
PFCP_SESSION_SCOPED_TYPES = frozenset(range(50, 58))

IPPROTO_TCP = 6
IPPROTO_UDP = 17

# The marker kernel probes prefix their output with; everything up to and
# including this token is stripped before grammar matching.
TRACE_MARKER = "TCBPF:"

_U64 = 0xFFFFFFFFFFFFFFFF


class MeasurePoint(Enum):
    M1 = "M1"          # GTP-U arrival on the N3-facing interface
    M3 = "M3"          # decapsulated IP delivery on the TUN interface
    PFCP_SEND = "P4S"  # request leaving the SMF PFCP socket
    PFCP_RECV = "P4R"  # response arriving on the SMF PFCP socket


# Namespace identity of the control-plane PFCP socket. P4 trace lines carry
# no ns= field, so PFCP events are pinned to this namespace.
SMF_NAMESPACE = "smf"

_NAMESPACE_RE = re.compile(r"[A-Za-z0-9_.-]+\Z")


@dataclass(frozen=True)
class GtpuHeader:
    """Decoded GTP-U outer header.

    header_length is the byte offset where the inner packet begins: 8 for
    the bare header, 12 when any of the sequence/N-PDU/extension flags is
    set. Extension headers beyond that first option block are deliberately
    not walked; the payload offset is all the pipeline needs.
    """

    version: int
    protocol_type: bool
    message_type: int
    payload_length: int
    teid: int
    header_length: int


@dataclass(frozen=True)
class FiveTuple:
    src_addr: str
    dst_addr: str
    protocol: int
    src_port: int
    dst_port: int


@dataclass(frozen=True)
class FlowKey:
    """64-bit correlation digest over the inner packet.

    Computed identically from the M1 view (inner packet after the GTP-U
    header) and the M3 view (raw packet off the TUN device), so the two
    sides of a forwarding-delay pair share a key even though the TEID is
    gone after decapsulation.
    """

    digest: int

    def hex(self) -> str:
        return f"{self.digest:016x}"


@dataclass(frozen=True)
class PfcpHeader:
    message_type: int
    sequence: int
    seid_present: bool
    seid: int | None = None


def _mix64(x: int) -> int:
    # splitmix64 finalizer; cheap enough to duplicate inside a kernel probe.
    x &= _U64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _U64
    return x ^ (x >> 31)


FLOW_KEY_SEED = 0x9E3779B97F4A7C15


def flow_key_digest(src_addr: int, dst_addr: int, protocol: int,
                    src_port: int, dst_port: int,
                    ipv4_id: int, inner_length: int) -> int:
    """Fixed 64-bit mixing function over the flow-identifying fields.

    Inputs are the inner five-tuple (addresses as host-order 32-bit ints),
    the IPv4 Identification field, and the IPv4 Total Length. The same
    constants and rounds are used by the kernel probes; changing anything
    here breaks cross-boundary key equality.
    """
    w0 = ((src_addr & 0xFFFFFFFF) << 32) | (dst_addr & 0xFFFFFFFF)
    w1 = (((src_port & 0xFFFF) << 48) | ((dst_port & 0xFFFF) << 32)
          | ((ipv4_id & 0xFFFF) << 16) | (inner_length & 0xFFFF))
    h = _mix64(w0 ^ FLOW_KEY_SEED)
    h = _mix64(h ^ w1)
    return _mix64(h ^ (protocol & 0xFF))


def _ip_str(addr: int) -> str:
    return f"{addr >> 24 & 0xFF}.{addr >> 16 & 0xFF}.{addr >> 8 & 0xFF}.{addr & 0xFF}"


def parse_gtpu(buffer: bytes) -> GtpuHeader:
    """Parse a GTP-U header from the start of an N3-side UDP payload.

    Never reads past the end of the buffer. Echo and error-indication
    messages raise NotGpdu so callers can skip them without treating the
    packet as corrupt. The declared payload_length is returned as-is and
    not checked against the capture, which may be truncated.
    """
    if len(buffer) < 8:
        raise TruncatedHeader(f"GTP-U header needs 8 bytes, got {len(buffer)}")
    flags = buffer[0]
    version = flags >> 5
    if version != 1:
        raise UnsupportedVersion(f"GTP-U version {version}")
    message_type = buffer[1]
    if message_type != GTPU_MSG_GPDU:
        raise NotGpdu(f"GTP-U message type 0x{message_type:02x}")
    payload_length, teid = struct.unpack_from(">HI", buffer, 2)
    # Any of E/S/PN present pulls in the 4-byte option block.
    header_length = 12 if flags & 0x07 else 8
    if len(buffer) < header_length:
        raise TruncatedHeader(
            f"GTP-U option block needs {header_length} bytes, got {len(buffer)}")
    return GtpuHeader(
        version=version,
        protocol_type=bool(flags & 0x10),
        message_type=message_type,
        payload_length=payload_length,
        teid=teid,
        header_length=header_length,
    )


def extract_flow_key(buffer: bytes, offset: int = 0) -> tuple[FiveTuple, FlowKey]:
    """Parse the inner IPv4 packet at `offset` and derive its flow key.

    The same bytes yield the same key whether they were reached through a
    GTP-U header (M1 view, offset = header_length) or straight off the TUN
    device (M3 view, offset = 0). Ports are zero for protocols other than
    TCP/UDP.
    """
    if offset < 0 or len(buffer) - offset < 20:
        raise TruncatedPacket(
            f"IPv4 header needs 20 bytes at offset {offset}, got {max(len(buffer) - offset, 0)}")
    vihl = buffer[offset]
    version = vihl >> 4
    if version != 4:
        raise UnsupportedIpVersion(f"inner IP version {version}")
    ihl = (vihl & 0x0F) * 4
    if ihl < 20 or len(buffer) - offset < ihl:
        raise TruncatedPacket(f"IPv4 IHL {ihl} exceeds capture")
    total_length, ident = struct.unpack_from(">HH", buffer, offset + 2)
    protocol = buffer[offset + 9]
    src, dst = struct.unpack_from(">II", buffer, offset + 12)
    if protocol in (IPPROTO_TCP, IPPROTO_UDP):
        if len(buffer) - offset < ihl + 4:
            raise TruncatedPacket("transport ports beyond capture")
        src_port, dst_port = struct.unpack_from(">HH", buffer, offset + ihl)
    else:
        src_port = dst_port = 0
    five = FiveTuple(_ip_str(src), _ip_str(dst), protocol, src_port, dst_port)
    digest = flow_key_digest(src, dst, protocol, src_port, dst_port,
                             ident, total_length)
    return five, FlowKey(digest)


def parse_pfcp(buffer: bytes) -> PfcpHeader:
    """Parse a PFCP header from a UDP payload on the N4 port.

    Only the header is decoded; information elements are out of scope.
    The seid_present flag is taken from the wire and not cross-checked
    against the message type, so malformed peers still parse.
    """
    if len(buffer) < 8:
        raise TruncatedHeader(f"PFCP header needs 8 bytes, got {len(buffer)}")
    flags = buffer[0]
    version = flags >> 5
    if version != 1:
        raise UnknownVersion(f"PFCP version {version}")
    message_type = buffer[1]
    seid_present = bool(flags & 0x01)
    if seid_present:
        if len(buffer) < 16:
            raise TruncatedHeader(
                f"PFCP header with SEID needs 16 bytes, got {len(buffer)}")
        seid = struct.unpack_from(">Q", buffer, 4)[0]
        seq_off = 12
    else:
        seid = None
        seq_off = 4
    sequence = (buffer[seq_off] << 16) | (buffer[seq_off + 1] << 8) | buffer[seq_off + 2]
    return PfcpHeader(message_type=message_type, sequence=sequence,
                      seid_present=seid_present, seid=seid)


@dataclass(frozen=True)
class ProbeEvent:
    """One timestamped observation at M1, M3, or the PFCP socket.

    Field presence depends on the point: M1 carries teid and flow_key,
    M3 carries flow_key only, PFCP points carry the transaction sequence
    and message type and are always attributed to the SMF namespace.
    Timestamps are nanoseconds on a single monotonic clock.
    """

    point: MeasurePoint
    namespace: str
    timestamp: int
    teid: int | None = None
    flow_key: int | None = None
    pfcp_seq: int | None = None
    pfcp_msg_type: int | None = None

    def __post_init__(self):
        if self.timestamp <= 0:
            raise InvalidEvent(f"timestamp must be > 0, got {self.timestamp}")
        if not _NAMESPACE_RE.match(self.namespace):
            raise InvalidEvent(f"bad namespace {self.namespace!r}")
        is_pfcp = self.point in (MeasurePoint.PFCP_SEND, MeasurePoint.PFCP_RECV)
        if is_pfcp:
            if self.namespace != SMF_NAMESPACE:
                raise InvalidEvent("PFCP events belong to the smf namespace")
            if self.pfcp_seq is None or self.pfcp_msg_type is None:
                raise InvalidEvent("PFCP event needs pfcp_seq and pfcp_msg_type")
            if not 0 <= self.pfcp_seq < 1 << 24:
                raise InvalidEvent(f"PFCP sequence {self.pfcp_seq} out of 24-bit range")
            if not 0 <= self.pfcp_msg_type <= 0xFF:
                raise InvalidEvent(f"PFCP message type {self.pfcp_msg_type} out of range")
            if self.teid is not None or self.flow_key is not None:
                raise InvalidEvent("PFCP event must not carry teid/flow_key")
            return
        if self.pfcp_seq is not None or self.pfcp_msg_type is not None:
            raise InvalidEvent(f"{self.point.value} event must not carry pfcp fields")
        if self.flow_key is None or not 0 <= self.flow_key < 1 << 64:
            raise InvalidEvent(f"{self.point.value} event needs a 64-bit flow_key")
        if self.point is MeasurePoint.M1:
            if self.teid is None or not 0 <= self.teid < 1 << 32:
                raise InvalidEvent("M1 event needs a 32-bit teid")
        elif self.teid is not None:
            raise InvalidEvent("M3 event must not carry a teid")


# Canonical bodies use fixed-width lowercase hex; the kernel printk path
# cannot zero-pad, so parsing tolerates shorter hex fields.
_M1_RE = re.compile(
    r"M1 ns=([A-Za-z0-9_.-]+) key=([0-9a-f]{1,16}) teid=([0-9a-f]{1,8}) ts=(\d+)\Z")
_M3_RE = re.compile(
    r"M3 ns=([A-Za-z0-9_.-]+) key=([0-9a-f]{1,16}) ts=(\d+)\Z")
_P4_RE = re.compile(
    r"P4 dir=([SR]) seq=(\d+) mt=(\d+) ts=(\d+)\Z")


def parse_trace_line(text: str) -> ProbeEvent:
    """Parse one trace line, canonical or raw-kernel-prefixed.

    Raw kernel lines carry task/CPU/flag columns before the probe output;
    everything up to and including the TCBPF: marker is discarded. Raises
    MalformedLine for anything that does not match the grammar; callers
    are expected to count these and keep streaming.
    """
    body = text
    idx = body.find(TRACE_MARKER)
    if idx >= 0:
        body = body[idx + len(TRACE_MARKER):]
    body = body.strip()
    try:
        if body.startswith("M1 "):
            m = _M1_RE.match(body)
            if not m:
                raise MalformedLine(f"bad M1 line: {text!r}")
            return ProbeEvent(MeasurePoint.M1, m.group(1), int(m.group(4)),
                              teid=int(m.group(3), 16),
                              flow_key=int(m.group(2), 16))
        if body.startswith("M3 "):
            m = _M3_RE.match(body)
            if not m:
                raise MalformedLine(f"bad M3 line: {text!r}")
            return ProbeEvent(MeasurePoint.M3, m.group(1), int(m.group(3)),
                              flow_key=int(m.group(2), 16))
        if body.startswith("P4 "):
            m = _P4_RE.match(body)
            if not m:
                raise MalformedLine(f"bad P4 line: {text!r}")
            point = (MeasurePoint.PFCP_SEND if m.group(1) == "S"
                     else MeasurePoint.PFCP_RECV)
            return ProbeEvent(point, SMF_NAMESPACE, int(m.group(4)),
                              pfcp_seq=int(m.group(2)),
                              pfcp_msg_type=int(m.group(3)))
    except InvalidEvent as exc:
        raise MalformedLine(f"invalid event in line {text!r}: {exc}") from exc
    raise MalformedLine(f"unrecognised line: {text!r}")


def emit_trace_line(event: ProbeEvent) -> str:
    """Render an event in canonical form: lowercase fixed-width hex,
    single spaces, LF terminator. parse_trace_line inverts this exactly.
    """
    p = event.point
    if p is MeasurePoint.M1:
        return (f"M1 ns={event.namespace} key={event.flow_key:016x} "
                f"teid={event.teid:08x} ts={event.timestamp}\n")
    if p is MeasurePoint.M3:
        return (f"M3 ns={event.namespace} key={event.flow_key:016x} "
                f"ts={event.timestamp}\n")
    d = "S" if p is MeasurePoint.PFCP_SEND else "R"
    return (f"P4 dir={d} seq={event.pfcp_seq} mt={event.pfcp_msg_type} "
            f"ts={event.timestamp}\n")
