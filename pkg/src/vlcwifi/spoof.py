"""Client-side "operating system spoofing" for the hybrid system.

The client's default route is pointed at a gateway that does not exist on the
VLC NIC's subnet, with a static ARP entry so the kernel never asks for it.
Applications then bind their sockets to the VLC NIC address. A capture hook
on the VLC NIC picks the outgoing frames up before they hit the wire,
re-addresses them as coming from the WiFi NIC and sends them to the router.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Network
from typing import NamedTuple

from .checksum import PROTO_TCP, PROTO_UDP
from .frames import Frame, MacAddr, TcpSegment, UdpDatagram, ip, mac, rewrite
from .netif import InterfaceIdentity

ANY = IPv4Address("0.0.0.0")


class SpoofError(ValueError):
    pass


class NoRouteError(LookupError):
    pass


@dataclass(frozen=True)
class Route:
    destination: IPv4Address
    genmask: IPv4Address
    gateway: IPv4Address
    iface: str
    metric: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "destination", ip(self.destination))
        object.__setattr__(self, "genmask", ip(self.genmask))
        object.__setattr__(self, "gateway", ip(self.gateway))
        self.network

    @property
    def network(self) -> IPv4Network:
        return IPv4Network(f"{self.destination}/{self.genmask}")

    @property
    def is_default(self) -> bool:
        return self.network.prefixlen == 0

    @property
    def flags(self) -> str:
        return "UG" if self.gateway != ANY else "U"


@dataclass(frozen=True)
class ArpEntry:
    mac: MacAddr
    static: bool = False


class Listener(NamedTuple):
    ip: IPv4Address
    port: int
    protocol: int


@dataclass
class HostTables:
    routes: list[Route] = field(default_factory=list)
    arp_cache: dict[IPv4Address, ArpEntry] = field(default_factory=dict)
    listeners: set[Listener] = field(default_factory=set)

    def __post_init__(self) -> None:
        if sum(r.is_default for r in self.routes) > 1:
            raise ValueError("at most one default route is allowed")

    def copy(self) -> "HostTables":
        return HostTables(list(self.routes), dict(self.arp_cache), set(self.listeners))

    def listen(self, addr: IPv4Address, port: int, protocol: int = PROTO_TCP) -> Listener:
        entry = Listener(ip(addr), port, protocol)
        self.listeners.add(entry)
        return entry

    def learn(self, addr: IPv4Address, hw: MacAddr) -> None:
        """Dynamic ARP update; static entries win."""
        addr = ip(addr)
        current = self.arp_cache.get(addr)
        if current is None or not current.static:
            self.arp_cache[addr] = ArpEntry(hw)


@dataclass(frozen=True)
class SpoofConfig:
    vlc_if: InterfaceIdentity
    wifi_if: InterfaceIdentity
    router_lan_mac: MacAddr
    phantom_gw_ip: IPv4Address = IPv4Address("192.168.2.1")
    phantom_gw_mac: MacAddr = MacAddr.parse("ab:ab:ab:ab:ab:ab")

    def __post_init__(self) -> None:
        object.__setattr__(self, "phantom_gw_ip", ip(self.phantom_gw_ip))
        object.__setattr__(self, "phantom_gw_mac", mac(self.phantom_gw_mac))
        object.__setattr__(self, "router_lan_mac", mac(self.router_lan_mac))
        owned = {self.vlc_if.mac, self.wifi_if.mac, self.router_lan_mac}
        if self.phantom_gw_mac in owned:
            raise SpoofError(f"phantom gateway MAC {self.phantom_gw_mac} belongs to a real NIC")


def install_spoof(tables: HostTables, config: SpoofConfig) -> HostTables:
    """Swap the default gateway for the phantom one on the VLC NIC."""
    if not config.vlc_if.in_subnet(config.phantom_gw_ip):
        raise SpoofError(
            f"{config.vlc_if.name} ({config.vlc_if.ip}/{config.vlc_if.subnet_mask}) has no address "
            f"in the phantom gateway's subnet ({config.phantom_gw_ip})"
        )
    phantom = Route(ANY, ANY, config.phantom_gw_ip, config.vlc_if.device, 0)
    routes = [r for r in tables.routes if not r.is_default]
    idx = next((i for i, r in enumerate(tables.routes) if r.is_default), 0)
    routes.insert(min(idx, len(routes)), phantom)
    out = tables.copy()
    out.routes = routes
    out.arp_cache[config.phantom_gw_ip] = ArpEntry(config.phantom_gw_mac, static=True)
    return out


def route_lookup(tables: HostTables, dst: IPv4Address) -> Route:
    """Longest prefix, then lowest metric, then table order."""
    dst = ip(dst)
    best: tuple[int, int, int] | None = None
    chosen = None
    for order, r in enumerate(tables.routes):
        if dst in r.network:
            key = (-r.network.prefixlen, r.metric, order)
            if best is None or key < best:
                best, chosen = key, r
    if chosen is None:
        raise NoRouteError(f"no route to {dst}")
    return chosen


def source_address(tables: HostTables, interfaces: list[InterfaceIdentity], dst: IPv4Address) -> IPv4Address:
    """Address the kernel would bind an outgoing socket to for ``dst``."""
    route = route_lookup(tables, dst)
    for nic in interfaces:
        if nic.device == route.iface:
            return nic.ip
    raise NoRouteError(f"route to {dst} uses unknown interface {route.iface}")


def uplink_rewrite(frame: Frame, config: SpoofConfig) -> Frame | None:
    """Turn a frame queued on the VLC NIC into one leaving the WiFi NIC.

    Only packets sourced from the VLC NIC address are handled; the capture
    also sees received traffic and that is skipped here.
    """
    pkt = frame.ipv4
    if pkt is None or pkt.src != config.vlc_if.ip:
        return None
    return rewrite(
        frame,
        src_ip=config.wifi_if.ip,
        src_mac=config.wifi_if.mac,
        dst_mac=config.router_lan_mac,
    )


def socket_match(tables: HostTables, frame: Frame) -> bool:
    pkt = frame.ipv4
    seg = frame.transport
    if pkt is None or not isinstance(seg, (TcpSegment, UdpDatagram)):
        return False
    proto = PROTO_TCP if isinstance(seg, TcpSegment) else PROTO_UDP
    return Listener(pkt.dst, seg.dst_port, proto) in tables.listeners


def dump_routes(tables: HostTables) -> str:
    """Kernel routing table text with the columns of ``route -n``."""
    header = ("Destination", "Gateway", "Genmask", "Flags", "Metric", "Iface")
    rows = [header] + [
        (str(r.destination), str(r.gateway), str(r.genmask), r.flags, str(r.metric), r.iface)
        for r in tables.routes
    ]
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


def with_listener(tables: HostTables, addr: IPv4Address, port: int, protocol: int = PROTO_TCP) -> HostTables:
    out = tables.copy()
    out.listen(addr, port, protocol)
    return out

