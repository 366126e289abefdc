"""Static description of a simulated network: hosts, router, links, channels."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from ipaddress import IPv4Address, IPv4Network

from .bond import MODE_LABELS
from .channels import ChannelSet
from .frames import MacAddr, ip
from .netif import InterfaceIdentity
from .relay import RelayConfig
from .spoof import HostTables, NoRouteError, SpoofConfig


class Mode(str, Enum):
    WIFI_ONLY = "wifi_only"
    HYBRID = "hybrid"
    AGGREGATED = "aggregated"


ALL_MODES = (Mode.WIFI_ONLY, Mode.HYBRID, Mode.AGGREGATED)


class TopologyError(ValueError):
    pass


class LinkKind(str, Enum):
    WIFI = "wifi"
    VLC = "vlc"
    ETHERNET = "ethernet"


@dataclass(frozen=True)
class StaticRoute:
    dst: IPv4Address
    mask: IPv4Address
    next_hop: IPv4Address
    metric: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "dst", ip(self.dst))
        object.__setattr__(self, "mask", ip(self.mask))
        object.__setattr__(self, "next_hop", ip(self.next_hop))

    @property
    def network(self) -> IPv4Network:
        return IPv4Network(f"{self.dst}/{self.mask}", strict=False)

    def to_dict(self) -> dict:
        return {"dst": str(self.dst), "mask": str(self.mask), "next_hop": str(self.next_hop), "metric": self.metric}


@dataclass(frozen=True)
class NextHop:
    port: str  # "LAN" or "WAN"
    address: IPv4Address  # what to resolve with ARP
    static: bool = False


@dataclass
class Router:
    lan: InterfaceIdentity
    wan: InterfaceIdentity
    static_routes: list[StaticRoute] = field(default_factory=list)
    arp_cache: dict[IPv4Address, MacAddr] = field(default_factory=dict)
    upstream: IPv4Address | None = None


def route_lookup(router: Router, dst: IPv4Address) -> NextHop:
    """Longest prefix wins; at equal length static entries beat connected ones, then lower metric."""
    dst = ip(dst)
    candidates = []
    for order, r in enumerate(router.static_routes):
        if dst in r.network:
            port = "LAN" if r.next_hop in router.lan.network else "WAN"
            candidates.append(((-r.network.prefixlen, 0, r.metric, order), NextHop(port, r.next_hop, True)))
    for order, (port, nic) in enumerate((("LAN", router.lan), ("WAN", router.wan))):
        if dst in nic.network:
            candidates.append(((-nic.network.prefixlen, 1, 0, order), NextHop(port, dst)))
    if router.upstream is not None:
        candidates.append(((0, 1, 0, 0), NextHop("WAN", router.upstream)))
    if not candidates:
        raise NoRouteError(f"router has no route to {dst}")
    return min(candidates, key=lambda c: c[0])[1]


@dataclass
class Host:
    name: str
    role: str  # client, relay, server, station, bond
    interfaces: list[InterfaceIdentity]
    tables: HostTables = field(default_factory=HostTables)
    ip_forward: bool = False

    def iface(self, name: str) -> InterfaceIdentity:
        for nic in self.interfaces:
            if nic.name == name:
                return nic
        raise KeyError(f"{self.name} has no interface {name}")


@dataclass(frozen=True)
class Link:
    """A segment joining interfaces, each given as ``"host/iface"``.

    A directed link only carries frames from its first endpoint.
    """

    name: str
    kind: LinkKind
    endpoints: tuple[str, ...]
    directed: bool = False


@dataclass(frozen=True)
class BondSpec:
    host: str
    logical_ip: IPv4Address
    logical_mac: MacAddr
    slaves: tuple[str, ...]
    vlc_slave: str
    wifi_slave: str
    mode: str = "adaptive-load-balancing"


@dataclass(frozen=True)
class EngineParams:
    # TCP goodput over the VLC path relative to the bare link rate
    vlc_path_efficiency: float = 70.0 / 74.0
    # uplink ACK bits per delivered downlink bit (delayed ACKs, full frames)
    ack_ratio: float = 0.018
    ethernet_latency_ms: float = 0.05
    wifi_jitter: float = 0.03
    vlc_jitter: float = 0.01
    latency_shape: float = 4.0
    # draw the blocking phase per seed instead of using the schedule's offset
    randomize_block_offset: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Topology:
    mode: Mode
    hosts: dict[str, Host]
    router: Router
    links: list[Link]
    channels: ChannelSet
    client: str
    server: str
    relay: RelayConfig | None = None
    relay_host: str | None = None
    spoof: SpoofConfig | None = None
    bond: BondSpec | None = None
    params: EngineParams = field(default_factory=EngineParams)

    def endpoint(self, ref: str) -> tuple[str, str]:
        host, _, nic = ref.partition("/")
        return host, nic

    def stations(self) -> list[str]:
        return [h.name for h in self.hosts.values() if h.role == "station"]


ROUTER = "router"


def validate(topo: Topology) -> None:
    """Raise :class:`TopologyError` describing the first problem found."""
    r = topo.router
    for sr in r.static_routes:
        try:
            sr.network
        except ValueError as exc:
            raise TopologyError(f"static route {sr.dst}/{sr.mask}: {exc}") from exc
        if sr.next_hop not in r.lan.network and sr.next_hop not in r.wan.network:
            raise TopologyError(f"static route {sr.dst}/{sr.mask}: next hop {sr.next_hop} is not on a connected subnet")
    for name in (topo.client, topo.server):
        if name not in topo.hosts:
            raise TopologyError(f"unknown host {name!r}")
    for link in topo.links:
        if len(link.endpoints) < 2:
            raise TopologyError(f"link {link.name} needs two endpoints")
        for ref in link.endpoints:
            host, nic = topo.endpoint(ref)
            if host == ROUTER:
                if nic not in ("LAN", "WAN"):
                    raise TopologyError(f"link {link.name}: router has no interface {nic!r}")
                continue
            if host not in topo.hosts:
                raise TopologyError(f"link {link.name}: unknown host {host!r}")
            try:
                topo.hosts[host].iface(nic)
            except KeyError as exc:
                raise TopologyError(f"link {link.name}: {exc.args[0]}") from None
    if topo.mode is Mode.HYBRID:
        if topo.relay is None or topo.relay_host is None or topo.spoof is None:
            raise TopologyError("hybrid mode needs a relay host, relay config and spoof config")
        relay = topo.hosts.get(topo.relay_host)
        if relay is None or relay.role != "relay":
            raise TopologyError(f"hybrid mode: {topo.relay_host!r} is not a relay host")
        if relay.ip_forward:
            raise TopologyError("hybrid mode: kernel forwarding must be off on the relay host")
    if topo.mode is Mode.AGGREGATED:
        b = topo.bond
        if b is None:
            raise TopologyError("aggregated mode needs a bond")
        if b.mode not in MODE_LABELS:
            raise TopologyError(f"bond mode {b.mode!r} unsupported; only adaptive-load-balancing is emulated")
        host = topo.hosts.get(b.host)
        if host is None:
            raise TopologyError(f"bond host {b.host!r} missing")
        for s in b.slaves:
            try:
                host.iface(s)
            except KeyError as exc:
                raise TopologyError(f"bond: {exc.args[0]}") from None
