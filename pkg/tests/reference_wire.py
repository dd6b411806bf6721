"""Independent reference encoders for the wire formats.

Written straight from the protocol layouts (GTP-U outer header, IPv4,
UDP/TCP, PFCP header) without importing anything from the production
codec, so parser tests check against a second, independently derived
description of each format.
"""

from __future__ import annotations

import socket
import struct

GPDU = 0xFF


def encode_gtpu(teid: int, payload: bytes, msg_type: int = GPDU,
                version: int = 1, with_options: bool = False,
                seq: int = 0, npdu: int = 0, next_ext: int = 0) -> bytes:
    """GTP-U header per the tunnelling protocol layout.

    Octet 1: version(3) | PT(1) | spare(1) | E | S | PN. The length field
    counts everything after the first 8 octets, including the optional
    4-octet block when any option flag is set.
    """
    flags = (version << 5) | 0x10
    body = payload
    if with_options:
        flags |= 0x02  # S flag; the whole option block is present anyway
        body = struct.pack(">HBB", seq, npdu, next_ext) + payload
    return struct.pack(">BBHI", flags, msg_type, len(body), teid) + body


def encode_ipv4(src: str, dst: str, proto: int, ident: int,
                payload: bytes, ttl: int = 64) -> bytes:
    total = 20 + len(payload)
    header = struct.pack(">BBHHHBBH4s4s",
                         0x45, 0, total, ident, 0, ttl, proto, 0,
                         socket.inet_aton(src), socket.inet_aton(dst))
    return header + payload


def encode_udp(sport: int, dport: int, payload: bytes) -> bytes:
    return struct.pack(">HHHH", sport, dport, 8 + len(payload), 0) + payload


def encode_tcp(sport: int, dport: int, payload: bytes = b"") -> bytes:
    return struct.pack(">HHIIBBHHH", sport, dport, 0, 0,
                       5 << 4, 0x10, 65535, 0, 0) + payload


def encode_icmp_echo(ident: int = 1, seqno: int = 1) -> bytes:
    return struct.pack(">BBHHH", 8, 0, 0, ident, seqno)


def encode_udp_packet(src: str, dst: str, sport: int, dport: int,
                      ident: int, payload_len: int) -> bytes:
    """Complete inner IPv4/UDP packet with an all-zero payload."""
    return encode_ipv4(src, dst, 17, ident,
                       encode_udp(sport, dport, bytes(payload_len)))


def encode_pfcp(msg_type: int, seq: int, seid: int | None = None,
                version: int = 1, body: bytes = b"") -> bytes:
    """PFCP header: flags, type, length, then SEID (if S set) and the
    24-bit sequence with a spare octet. Length counts everything after
    the length field itself."""
    seq_block = struct.pack(">I", seq << 8)  # 3 bytes of seq + spare
    if seid is not None:
        flags = (version << 5) | 0x01
        rest = struct.pack(">Q", seid) + seq_block + body
    else:
        flags = version << 5
        rest = seq_block + body
    return struct.pack(">BBH", flags, msg_type, len(rest)) + rest
