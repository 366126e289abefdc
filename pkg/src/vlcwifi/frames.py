"""Byte-accurate Ethernet II frames carrying IPv4 (TCP/UDP) or ARP.

Values are immutable; rewrites go through ``dataclasses.replace`` followed by
:func:`recompute_checksums`. Serialization writes checksum fields exactly as
stored, so a frame rewritten without recomputation stays broken on the wire.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from enum import IntEnum, IntFlag
from ipaddress import IPv4Address
from typing import Iterable, Union

from .checksum import (
    PROTO_TCP,
    PROTO_UDP,
    ipv4_checksum,
    ones_complement_sum,
    pseudo_header,
    transport_checksum,
)

ETH_HEADER_LEN = 14
IPV4_HEADER_LEN = 20
TCP_HEADER_LEN = 20
UDP_HEADER_LEN = 8
ARP_LEN = 28

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_ARP = 0x0806

Ipv4Addr = IPv4Address


class FrameError(ValueError):
    """Malformed frame bytes."""


class TruncatedFrameError(FrameError):
    """Byte string shorter than the headers it declares."""


def ip(value: Union[str, int, IPv4Address]) -> IPv4Address:
    return value if isinstance(value, IPv4Address) else IPv4Address(value)


@dataclass(frozen=True, order=True)
class MacAddr:
    octets: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.octets, bytes):
            object.__setattr__(self, "octets", bytes(self.octets))
        if len(self.octets) != 6:
            raise ValueError(f"MAC address needs 6 octets, got {len(self.octets)}")

    @classmethod
    def parse(cls, text: Union[str, "MacAddr"]) -> "MacAddr":
        if isinstance(text, MacAddr):
            return text
        parts = text.replace("-", ":").split(":")
        if len(parts) != 6:
            raise ValueError(f"bad MAC address {text!r}")
        return cls(bytes(int(p, 16) for p in parts))

    @property
    def is_broadcast(self) -> bool:
        return self.octets == b"\xff" * 6

    @property
    def is_zero(self) -> bool:
        return self.octets == b"\x00" * 6

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    def __repr__(self) -> str:
        return f"MacAddr('{self}')"


BROADCAST_MAC = MacAddr(b"\xff" * 6)
ZERO_MAC = MacAddr(b"\x00" * 6)


def mac(value: Union[str, MacAddr]) -> MacAddr:
    return MacAddr.parse(value)


class TcpFlags(IntFlag):
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    PSH = 0x08
    ACK = 0x10
    URG = 0x20
    ECE = 0x40
    CWR = 0x80


class ArpOp(IntEnum):
    REQUEST = 1
    REPLY = 2


@dataclass(frozen=True)
class TcpSegment:
    src_port: int
    dst_port: int
    seq: int = 0
    ack: int = 0
    flags: int = 0
    window: int = 65535
    checksum: int = 0
    urgent: int = 0
    options: bytes = b""
    payload: bytes = b""

    def __post_init__(self) -> None:
        if len(self.options) % 4 or len(self.options) > 40:
            raise ValueError("TCP options must be word aligned and at most 40 bytes")

    @property
    def header_len(self) -> int:
        return TCP_HEADER_LEN + len(self.options)

    @property
    def wire_len(self) -> int:
        return self.header_len + len(self.payload)

    @property
    def payload_len(self) -> int:
        return len(self.payload)

    def to_bytes(self, checksum: int | None = None) -> bytes:
        csum = self.checksum if checksum is None else checksum
        offset_flags = ((self.header_len // 4) << 12) | (self.flags & 0x0FFF)
        header = struct.pack(
            "!HHIIHHHH",
            self.src_port,
            self.dst_port,
            self.seq,
            self.ack,
            offset_flags,
            self.window,
            csum,
            self.urgent,
        )
        return header + self.options + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "TcpSegment":
        if len(data) < TCP_HEADER_LEN:
            raise TruncatedFrameError(f"TCP header needs 20 bytes, got {len(data)}")
        src, dst, seq, ack, offset_flags, window, csum, urg = struct.unpack("!HHIIHHHH", data[:20])
        hlen = (offset_flags >> 12) * 4
        if hlen < TCP_HEADER_LEN:
            raise FrameError(f"TCP data offset {hlen} below minimum")
        if hlen > len(data):
            raise TruncatedFrameError(f"TCP header declares {hlen} bytes, got {len(data)}")
        return cls(
            src_port=src,
            dst_port=dst,
            seq=seq,
            ack=ack,
            flags=offset_flags & 0x0FFF,
            window=window,
            checksum=csum,
            urgent=urg,
            options=bytes(data[20:hlen]),
            payload=bytes(data[hlen:]),
        )


@dataclass(frozen=True)
class UdpDatagram:
    src_port: int
    dst_port: int
    checksum: int = 0
    payload: bytes = b""
    length: int = -1

    def __post_init__(self) -> None:
        if self.length < 0:
            object.__setattr__(self, "length", UDP_HEADER_LEN + len(self.payload))

    @property
    def flags(self) -> int:
        return 0

    @property
    def wire_len(self) -> int:
        return UDP_HEADER_LEN + len(self.payload)

    @property
    def payload_len(self) -> int:
        return len(self.payload)

    def to_bytes(self, checksum: int | None = None) -> bytes:
        csum = self.checksum if checksum is None else checksum
        return struct.pack("!HHHH", self.src_port, self.dst_port, self.length, csum) + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "UdpDatagram":
        if len(data) < UDP_HEADER_LEN:
            raise TruncatedFrameError(f"UDP header needs 8 bytes, got {len(data)}")
        src, dst, length, csum = struct.unpack("!HHHH", data[:8])
        return cls(src_port=src, dst_port=dst, checksum=csum, payload=bytes(data[8:]), length=length)


TransportSegment = Union[TcpSegment, UdpDatagram]


def _body_bytes(body: Union[TransportSegment, bytes], checksum: int | None = None) -> bytes:
    if isinstance(body, (bytes, bytearray)):
        return bytes(body)
    return body.to_bytes(checksum)


def _body_len(body: Union[TransportSegment, bytes]) -> int:
    return len(body) if isinstance(body, (bytes, bytearray)) else body.wire_len


@dataclass(frozen=True)
class Ipv4Packet:
    src: IPv4Address
    dst: IPv4Address
    protocol: int
    body: Union[TransportSegment, bytes] = b""
    ttl: int = 64
    tos: int = 0
    identification: int = 0
    flags_fragment: int = 0x4000
    header_checksum: int = 0
    total_length: int = -1

    def __post_init__(self) -> None:
        object.__setattr__(self, "src", ip(self.src))
        object.__setattr__(self, "dst", ip(self.dst))
        expected = IPV4_HEADER_LEN + _body_len(self.body)
        if self.total_length < 0:
            object.__setattr__(self, "total_length", expected)
        elif self.total_length != expected:
            raise ValueError(f"total_length {self.total_length} disagrees with body ({expected})")

    @property
    def is_fragment(self) -> bool:
        return bool(self.flags_fragment & 0x2000) or bool(self.flags_fragment & 0x1FFF)

    def header_bytes(self, checksum: int | None = None) -> bytes:
        csum = self.header_checksum if checksum is None else checksum
        return struct.pack(
            "!BBHHHBBH4s4s",
            0x45,
            self.tos,
            self.total_length,
            self.identification,
            self.flags_fragment,
            self.ttl,
            self.protocol,
            csum,
            self.src.packed,
            self.dst.packed,
        )

    def to_bytes(self) -> bytes:
        return self.header_bytes() + _body_bytes(self.body)

    @classmethod
    def from_bytes(cls, data: bytes) -> tuple["Ipv4Packet", bytes]:
        """Parse one packet; returns it with any link-layer padding that followed."""
        if len(data) < IPV4_HEADER_LEN:
            raise TruncatedFrameError(f"IPv4 header needs 20 bytes, got {len(data)}")
        (ver_ihl, tos, total, ident, flags_frag, ttl, proto, csum, src, dst) = struct.unpack(
            "!BBHHHBBH4s4s", data[:20]
        )
        if ver_ihl >> 4 != 4:
            raise FrameError(f"not IPv4 (version {ver_ihl >> 4})")
        if ver_ihl & 0x0F != 5:
            raise FrameError("IPv4 options are not supported")
        if total < IPV4_HEADER_LEN:
            raise FrameError(f"IPv4 total length {total} below header length")
        if total > len(data):
            raise TruncatedFrameError(f"IPv4 total length {total} exceeds {len(data)} available bytes")
        raw = bytes(data[20:total])
        fragment = bool(flags_frag & 0x2000) or bool(flags_frag & 0x1FFF)
        body: Union[TransportSegment, bytes] = raw
        if not fragment:
            if proto == PROTO_TCP:
                body = TcpSegment.from_bytes(raw)
            elif proto == PROTO_UDP:
                body = UdpDatagram.from_bytes(raw)
        pkt = cls(
            src=IPv4Address(src),
            dst=IPv4Address(dst),
            protocol=proto,
            body=body,
            ttl=ttl,
            tos=tos,
            identification=ident,
            flags_fragment=flags_frag,
            header_checksum=csum,
            total_length=total,
        )
        return pkt, bytes(data[total:])


@dataclass(frozen=True)
class ArpMessage:
    op: int
    sender_mac: MacAddr
    sender_ip: IPv4Address
    target_mac: MacAddr
    target_ip: IPv4Address

    def __post_init__(self) -> None:
        object.__setattr__(self, "sender_mac", mac(self.sender_mac))
        object.__setattr__(self, "target_mac", mac(self.target_mac))
        object.__setattr__(self, "sender_ip", ip(self.sender_ip))
        object.__setattr__(self, "target_ip", ip(self.target_ip))
        if self.op in (ArpOp.REQUEST, ArpOp.REPLY):
            object.__setattr__(self, "op", ArpOp(self.op))

    @property
    def is_request(self) -> bool:
        return self.op == ArpOp.REQUEST

    @property
    def is_reply(self) -> bool:
        return self.op == ArpOp.REPLY

    def to_bytes(self) -> bytes:
        return struct.pack(
            "!HHBBH6s4s6s4s",
            1,
            ETHERTYPE_IPV4,
            6,
            4,
            int(self.op),
            self.sender_mac.octets,
            self.sender_ip.packed,
            self.target_mac.octets,
            self.target_ip.packed,
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "ArpMessage | None":
        """None when the hardware/protocol pair is not Ethernet/IPv4."""
        if len(data) < ARP_LEN:
            raise TruncatedFrameError(f"ARP body needs 28 bytes, got {len(data)}")
        htype, ptype, hlen, plen, op, smac, sip, tmac, tip = struct.unpack(
            "!HHBBH6s4s6s4s", data[:ARP_LEN]
        )
        if (htype, ptype, hlen, plen) != (1, ETHERTYPE_IPV4, 6, 4):
            return None
        return cls(op, MacAddr(smac), IPv4Address(sip), MacAddr(tmac), IPv4Address(tip))


Payload = Union[Ipv4Packet, ArpMessage, bytes]


@dataclass(frozen=True)
class Frame:
    dst_mac: MacAddr
    src_mac: MacAddr
    ethertype: int
    payload: Payload = b""
    trailer: bytes = field(default=b"", repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "dst_mac", mac(self.dst_mac))
        object.__setattr__(self, "src_mac", mac(self.src_mac))

    @property
    def wire_len(self) -> int:
        p = self.payload
        if isinstance(p, Ipv4Packet):
            body = p.total_length
        elif isinstance(p, ArpMessage):
            body = ARP_LEN
        else:
            body = len(p)
        return ETH_HEADER_LEN + body + len(self.trailer)

    @property
    def ipv4(self) -> Ipv4Packet | None:
        return self.payload if isinstance(self.payload, Ipv4Packet) else None

    @property
    def arp(self) -> ArpMessage | None:
        return self.payload if isinstance(self.payload, ArpMessage) else None

    @property
    def transport(self) -> TransportSegment | None:
        pkt = self.ipv4
        if pkt is None or isinstance(pkt.body, (bytes, bytearray)):
            return None
        return pkt.body

    def summary(self) -> str:
        head = f"{self.src_mac} > {self.dst_mac}"
        arp = self.arp
        if arp is not None:
            if arp.is_request:
                return f"{head} ARP who-has {arp.target_ip} tell {arp.sender_ip}"
            if arp.is_reply:
                return f"{head} ARP reply {arp.sender_ip} is-at {arp.sender_mac}"
            return f"{head} ARP op{int(arp.op)} {arp.sender_ip} > {arp.target_ip}"
        pkt = self.ipv4
        if pkt is None:
            return f"{head} ethertype 0x{self.ethertype:04x} len {self.wire_len}"
        seg = self.transport
        if isinstance(seg, TcpSegment):
            flags = "|".join(f.name for f in TcpFlags if seg.flags & f) or "-"
            return (
                f"{head} TCP {pkt.src}:{seg.src_port} > {pkt.dst}:{seg.dst_port} "
                f"[{flags}] len {seg.payload_len}"
            )
        if isinstance(seg, UdpDatagram):
            return f"{head} UDP {pkt.src}:{seg.src_port} > {pkt.dst}:{seg.dst_port} len {seg.payload_len}"
        return f"{head} IP {pkt.src} > {pkt.dst} proto {pkt.protocol}"


def parse_frame(data: bytes) -> Frame:
    data = bytes(data)
    if len(data) < ETH_HEADER_LEN:
        raise TruncatedFrameError(f"Ethernet header needs 14 bytes, got {len(data)}")
    dst, src, ethertype = struct.unpack("!6s6sH", data[:ETH_HEADER_LEN])
    rest = data[ETH_HEADER_LEN:]
    payload: Payload = rest
    trailer = b""
    if ethertype == ETHERTYPE_IPV4:
        payload, trailer = Ipv4Packet.from_bytes(rest)
    elif ethertype == ETHERTYPE_ARP:
        msg = ArpMessage.from_bytes(rest)
        if msg is not None:
            payload, trailer = msg, rest[ARP_LEN:]
    return Frame(MacAddr(dst), MacAddr(src), ethertype, payload, trailer)


def serialize_frame(frame: Frame) -> bytes:
    p = frame.payload
    body = p.to_bytes() if isinstance(p, (Ipv4Packet, ArpMessage)) else bytes(p)
    return (
        struct.pack("!6s6sH", frame.dst_mac.octets, frame.src_mac.octets, frame.ethertype)
        + body
        + frame.trailer
    )


def _transport_verifies(pkt: Ipv4Packet) -> bool:
    seg = pkt.body
    if isinstance(seg, (bytes, bytearray)):
        return True
    if isinstance(seg, UdpDatagram) and seg.checksum == 0:
        return True
    raw = seg.to_bytes()
    return ones_complement_sum(pseudo_header(pkt.src, pkt.dst, pkt.protocol, len(raw)) + raw) == 0xFFFF


def verify_checksums(frame: Frame) -> bool:
    pkt = frame.ipv4
    if pkt is None:
        return True
    if ones_complement_sum(pkt.header_bytes()) != 0xFFFF:
        return False
    return _transport_verifies(pkt)


def recompute_checksums(frame: Frame) -> Frame:
    """Return the frame with transport and IP header checksums made valid."""
    pkt = frame.ipv4
    if pkt is None:
        return frame
    body = pkt.body
    if isinstance(body, TcpSegment):
        body = replace(body, checksum=transport_checksum(pkt.src, pkt.dst, PROTO_TCP, body.to_bytes(0)))
    elif isinstance(body, UdpDatagram):
        csum = transport_checksum(pkt.src, pkt.dst, PROTO_UDP, body.to_bytes(0))
        body = replace(body, checksum=csum or 0xFFFF)
    pkt = replace(pkt, body=body, header_checksum=0)
    pkt = replace(pkt, header_checksum=ipv4_checksum(pkt.header_bytes(0)))
    return replace(frame, payload=pkt)


def rewrite(
    frame: Frame,
    *,
    dst_mac: MacAddr | None = None,
    src_mac: MacAddr | None = None,
    src_ip: IPv4Address | None = None,
    dst_ip: IPv4Address | None = None,
    ttl: int | None = None,
) -> Frame:
    """Header rewrite with checksum recomputation (the relay/spoof primitive)."""
    out = frame
    if dst_mac is not None or src_mac is not None:
        out = replace(out, dst_mac=dst_mac or out.dst_mac, src_mac=src_mac or out.src_mac)
    pkt = out.ipv4
    if pkt is not None and (src_ip is not None or dst_ip is not None or ttl is not None):
        pkt = replace(
            pkt,
            src=pkt.src if src_ip is None else ip(src_ip),
            dst=pkt.dst if dst_ip is None else ip(dst_ip),
            ttl=pkt.ttl if ttl is None else ttl,
        )
        out = replace(out, payload=pkt)
    return recompute_checksums(out)


def tcp_frame(
    src_mac: MacAddr | str,
    dst_mac: MacAddr | str,
    src_ip: IPv4Address | str,
    dst_ip: IPv4Address | str,
    src_port: int,
    dst_port: int,
    flags: int = TcpFlags.ACK,
    payload: bytes = b"",
    seq: int = 0,
    ack: int = 0,
    ttl: int = 64,
    identification: int = 0,
) -> Frame:
    seg = TcpSegment(src_port, dst_port, seq=seq, ack=ack, flags=int(flags), payload=payload)
    pkt = Ipv4Packet(ip(src_ip), ip(dst_ip), PROTO_TCP, seg, ttl=ttl, identification=identification)
    return recompute_checksums(Frame(mac(dst_mac), mac(src_mac), ETHERTYPE_IPV4, pkt))


def udp_frame(
    src_mac: MacAddr | str,
    dst_mac: MacAddr | str,
    src_ip: IPv4Address | str,
    dst_ip: IPv4Address | str,
    src_port: int,
    dst_port: int,
    payload: bytes = b"",
    ttl: int = 64,
) -> Frame:
    seg = UdpDatagram(src_port, dst_port, payload=payload)
    pkt = Ipv4Packet(ip(src_ip), ip(dst_ip), PROTO_UDP, seg, ttl=ttl)
    return recompute_checksums(Frame(mac(dst_mac), mac(src_mac), ETHERTYPE_IPV4, pkt))


def arp_frame(msg: ArpMessage, dst_mac: MacAddr | None = None, src_mac: MacAddr | None = None) -> Frame:
    if dst_mac is None:
        dst_mac = BROADCAST_MAC if msg.is_request else msg.target_mac
    return Frame(dst_mac, src_mac or msg.sender_mac, ETHERTYPE_ARP, msg)


# Hex-dump text lines: one frame per line, '#' starts a comment.


def frame_to_hex(frame: Frame) -> str:
    return serialize_frame(frame).hex()


def frame_from_hex(line: str) -> Frame:
    return parse_frame(bytes.fromhex("".join(line.split())))


def dump_hex_lines(frames: Iterable[Frame]) -> str:
    return "".join(frame_to_hex(f) + "\n" for f in frames)


def load_hex_lines(text: str) -> list[Frame]:
    frames = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            frames.append(frame_from_hex(line))
        except ValueError as exc:
            raise FrameError(f"line {lineno}: {exc}") from exc
    return frames
