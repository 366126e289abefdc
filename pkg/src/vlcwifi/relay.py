"""Userspace relay on the intermediate host (PC I of the hybrid system).

Kernel forwarding on the relay stays off; otherwise packets addressed to the
client's WiFi NIC would be routed straight back to the router. Frames are
instead captured raw on the router-facing NIC, readdressed to the client's VLC
NIC and re-emitted on the VLC-facing NIC.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from ipaddress import IPv4Address
from typing import Iterable, Iterator, Union

from .frames import Frame, FrameError, MacAddr, ip, mac, parse_frame, rewrite
from .netif import InterfaceIdentity

DEFAULT_MTU = 1500


@dataclass(frozen=True)
class RelayConfig:
    capture_if: InterfaceIdentity
    emit_if: InterfaceIdentity
    client_wifi_ip: IPv4Address
    client_vlc_mac: MacAddr
    client_vlc_ip: IPv4Address
    mtu: int = DEFAULT_MTU

    def __post_init__(self) -> None:
        object.__setattr__(self, "client_wifi_ip", ip(self.client_wifi_ip))
        object.__setattr__(self, "client_vlc_ip", ip(self.client_vlc_ip))
        object.__setattr__(self, "client_vlc_mac", mac(self.client_vlc_mac))
        if self.mtu <= 0:
            raise ValueError(f"mtu must be positive, got {self.mtu}")
        if self.client_wifi_ip == self.client_vlc_ip:
            raise ValueError("client WiFi and VLC addresses must differ")


@dataclass
class RelayStats:
    captured: int = 0
    oversize_dropped: int = 0
    non_matching_ignored: int = 0
    forwarded: int = 0
    # subset of non_matching_ignored
    malformed: int = 0

    def consistent(self) -> bool:
        return self.captured == self.oversize_dropped + self.non_matching_ignored + self.forwarded

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["counter", "value"])
        for key, value in asdict(self).items():
            writer.writerow([key, value])
        return buf.getvalue()


def relay_step(frame: Union[Frame, bytes], config: RelayConfig) -> Frame | None:
    """Process one captured frame; returns the frame to emit on the VLC NIC or None.

    Raw bytes are length-checked before parsing, as a capture buffer would be.
    Parse failures raise :class:`FrameError`.
    """
    if isinstance(frame, (bytes, bytearray)):
        if len(frame) > config.mtu:
            return None
        frame = parse_frame(frame)
    if frame.wire_len > config.mtu:
        return None
    pkt = frame.ipv4
    if pkt is None or pkt.dst != config.client_wifi_ip:
        return None
    # TTL untouched: no routing hop happens here
    return rewrite(
        frame,
        dst_mac=config.client_vlc_mac,
        src_mac=config.emit_if.mac,
        dst_ip=config.client_vlc_ip,
    )


class Relay:
    """Stateful wrapper over :func:`relay_step` that keeps the counters."""

    def __init__(self, config: RelayConfig):
        self.config = config
        self.stats = RelayStats()

    def process(self, item: Union[Frame, bytes]) -> Frame | None:
        self.stats.captured += 1
        length = len(item) if isinstance(item, (bytes, bytearray)) else item.wire_len
        if length > self.config.mtu:
            self.stats.oversize_dropped += 1
            return None
        try:
            out = relay_step(item, self.config)
        except FrameError:
            self.stats.malformed += 1
            self.stats.non_matching_ignored += 1
            return None
        if out is None:
            self.stats.non_matching_ignored += 1
        else:
            self.stats.forwarded += 1
        return out


def relay_loop(
    inbound: Iterable[Union[Frame, bytes]], config: RelayConfig
) -> tuple[list[Frame], RelayStats]:
    relay = Relay(config)
    out = [f for f in map(relay.process, inbound) if f is not None]
    return out, relay.stats


def iter_relay(inbound: Iterable[Union[Frame, bytes]], relay: Relay) -> Iterator[Frame]:
    """Streaming variant for unbounded captures."""
    for item in inbound:
        out = relay.process(item)
        if out is not None:
            yield out
