"""Ones'-complement Internet checksum arithmetic (RFC 1071).

Every header rewrite done by the relay or the spoofing hook has to end here:
the TCP/UDP checksum covers a pseudo-header that includes both IP addresses,
so changing an address without recomputing leaves the frame undeliverable.
"""

from __future__ import annotations

import struct
from ipaddress import IPv4Address

PROTO_TCP = 6
PROTO_UDP = 17


def ones_complement_sum(data: bytes) -> int:
    """Folded 16-bit ones'-complement sum of big-endian words.

    An odd trailing byte is padded with a zero byte.
    """
    if len(data) % 2:
        data = bytes(data) + b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return total


def internet_checksum(data: bytes) -> int:
    return ~ones_complement_sum(data) & 0xFFFF


def ipv4_checksum(header_bytes: bytes) -> int:
    """Checksum of an IPv4 header whose checksum field is zeroed."""
    if len(header_bytes) % 2:
        raise ValueError(f"IPv4 header length must be even, got {len(header_bytes)} bytes")
    return internet_checksum(header_bytes)


def pseudo_header(src_ip: IPv4Address, dst_ip: IPv4Address, protocol: int, length: int) -> bytes:
    return src_ip.packed + dst_ip.packed + struct.pack("!BBH", 0, protocol, length)


def transport_checksum(
    src_ip: IPv4Address, dst_ip: IPv4Address, protocol: int, segment_bytes: bytes
) -> int:
    """TCP/UDP checksum over pseudo-header plus segment (checksum field zeroed).

    Returns the raw complement. Callers emitting UDP map a result of 0x0000
    to 0xFFFF themselves, since zero means "no checksum" for UDP.
    """
    data = pseudo_header(src_ip, dst_ip, protocol, len(segment_bytes)) + bytes(segment_bytes)
    return internet_checksum(data)
