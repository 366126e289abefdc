"""Scenario files: JSON description of a topology, its channels and flows.

A scenario names a mode and a handful of knobs; :func:`build_topology` lays
out the testbed addresses, links and host tables for that mode.

WiFi stations: ``contenders`` counts every station on the access point, the
measured client included, so ``contenders - 1`` extra stations run bulk
downloads alongside it.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .channels import BlockingSchedule, ChannelSet, VlcChannel, WifiChannel
from .engine import Flow, PageSpec
from .frames import ip, mac
from .netif import InterfaceIdentity
from .relay import DEFAULT_MTU, RelayConfig
from .spoof import ANY, ArpEntry, HostTables, Route, SpoofConfig, install_spoof
from .topology import (
    ROUTER,
    BondSpec,
    EngineParams,
    Host,
    Link,
    LinkKind,
    Mode,
    Router,
    StaticRoute,
    Topology,
    validate,
)

CLIENT = "client"
RELAY = "relay"
SERVER = "server"

# default testbed addressing
DEFAULT_IFACES: dict[str, dict[str, str]] = {
    "router.LAN": {"mac": "02:00:00:00:01:01", "ip": "192.168.1.1"},
    "router.WAN": {"mac": "02:00:00:00:01:02", "ip": "10.0.0.1"},
    "server.S": {"mac": "02:00:00:00:0a:0a", "ip": "10.0.0.10", "device": "eth0"},
    "relay.A-1": {"mac": "02:00:00:00:0a:01", "ip": "192.168.1.200", "device": "eth0"},
    "relay.A-2": {"mac": "02:00:00:00:0a:02", "ip": "192.168.2.200", "device": "eth1"},
    "client.B-1": {"mac": "02:00:00:00:0b:01", "ip": "192.168.1.100", "device": "wlan0"},
    "client.B-2": {"mac": "02:00:00:00:0b:02", "ip": "192.168.2.100", "device": "eth0"},
    "client.C-1": {"mac": "02:00:00:00:0c:01", "ip": "192.168.1.100", "device": "eth0"},
    "client.C-2": {"mac": "02:00:00:00:0c:02", "ip": "192.168.1.100", "device": "wlan0"},
    "client.bond0": {"mac": "02:00:00:00:0c:00", "ip": "192.168.1.100", "device": "bond0"},
}

BACKGROUND_MARGIN_S = 1.0

RELAY_HOST_ROUTES = (StaticRoute("192.168.1.100", "255.255.255.255", "192.168.1.200", 2),)


class ScenarioConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    mode: Mode = Mode.WIFI_ONLY
    contenders: int = 1
    wifi: WifiChannel = field(default_factory=WifiChannel)
    vlc: VlcChannel = field(default_factory=VlcChannel)
    blocking: BlockingSchedule = field(default_factory=BlockingSchedule)
    mtu: int = DEFAULT_MTU
    phantom_gw_ip: str = "192.168.2.1"
    phantom_gw_mac: str = "ab:ab:ab:ab:ab:ab"
    bond_mode: str = "adaptive-load-balancing"
    # None: the relay host route in hybrid mode, nothing otherwise
    static_routes: list[StaticRoute] | None = None
    interfaces: dict[str, dict[str, str]] = field(default_factory=dict)
    params: EngineParams = field(default_factory=EngineParams)
    flows: list[Flow] | None = None
    # workload used when ``flows`` is not given
    duration_s: float = 5.0
    page: PageSpec | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        self.mode = Mode(self.mode)
        if self.contenders < 1:
            raise ScenarioConfigError("contenders: need at least one station")
        if self.mtu <= 0:
            raise ScenarioConfigError("mtu: must be positive")
        if self.duration_s <= 0:
            raise ScenarioConfigError("duration_s: must be positive")

    # -- JSON ----------------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ScenarioConfigError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
        kw = dict(d)
        try:
            if "wifi" in kw:
                w = dict(kw["wifi"])
                if "efficiency_curve" in w:
                    w["efficiency_curve"] = tuple(tuple(p) for p in w["efficiency_curve"])
                kw["wifi"] = WifiChannel(**w)
            if "vlc" in kw:
                v = dict(kw["vlc"])
                for key in ("rate_anchors", "coverage_limit"):
                    if key in v:
                        v[key] = tuple(tuple(p) for p in v[key])
                kw["vlc"] = VlcChannel(**v)
            if "blocking" in kw:
                kw["blocking"] = BlockingSchedule(**kw["blocking"])
            if kw.get("static_routes") is not None:
                kw["static_routes"] = [StaticRoute(**r) for r in kw["static_routes"]]
            if "params" in kw:
                kw["params"] = EngineParams(**kw["params"])
            if kw.get("page") is not None:
                kw["page"] = PageSpec(**kw["page"])
            if kw.get("flows") is not None:
                kw["flows"] = [_flow_from_dict(f) for f in kw["flows"]]
            if "mode" in kw:
                kw["mode"] = Mode(kw["mode"])
        except (TypeError, ValueError) as exc:
            raise ScenarioConfigError(str(exc)) from exc
        return cls(**kw)

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode.value,
            "contenders": self.contenders,
            "wifi": asdict(self.wifi),
            "vlc": asdict(self.vlc),
            "blocking": {**asdict(self.blocking), "pattern": self.blocking.pattern.value},
            "mtu": self.mtu,
            "phantom_gw_ip": self.phantom_gw_ip,
            "phantom_gw_mac": self.phantom_gw_mac,
            "bond_mode": self.bond_mode,
            "static_routes": None if self.static_routes is None else [r.to_dict() for r in self.static_routes],
            "interfaces": self.interfaces,
            "params": self.params.to_dict(),
            "flows": None if self.flows is None else [_flow_to_dict(f) for f in self.flows],
            "duration_s": self.duration_s,
            "page": None if self.page is None else asdict(self.page),
            "seed": self.seed,
        }
        return json.loads(json.dumps(out))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _flow_from_dict(d: dict) -> Flow:
    d = dict(d)
    if d.get("page") is not None:
        d["page"] = PageSpec(**d["page"])
    return Flow(**d)


def _flow_to_dict(f: Flow) -> dict:
    return asdict(f)


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioConfigError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ScenarioConfigError(f"{path}: top level must be an object")
    return ScenarioConfig.from_dict(data)


# ---------------------------------------------------------------------------


def _iface(cfg: ScenarioConfig, key: str) -> InterfaceIdentity:
    spec = {**DEFAULT_IFACES.get(key, {}), **cfg.interfaces.get(key, {})}
    name = key.split(".", 1)[1]
    try:
        return InterfaceIdentity.from_dict(name, spec)
    except (KeyError, ValueError) as exc:
        raise ScenarioConfigError(f"interfaces.{key}: {exc}") from exc


def station_name(k: int) -> str:
    return f"sta-{k}"


def _station(k: int, router_lan: InterfaceIdentity) -> Host:
    nic = InterfaceIdentity("W", mac(f"02:00:00:00:5a:{k:02x}"), ip(f"192.168.1.{10 + k}"), device="wlan0")
    tables = HostTables(
        routes=[Route(ANY, ANY, router_lan.ip, "wlan0"), Route("192.168.1.0", "255.255.255.0", ANY, "wlan0")],
        arp_cache={router_lan.ip: ArpEntry(router_lan.mac)},
    )
    return Host(station_name(k), "station", [nic], tables)


def hybrid_client_tables(b1: InterfaceIdentity, b2: InterfaceIdentity, gateway: InterfaceIdentity) -> HostTables:
    """The client's tables before spoofing: default route out of the WiFi NIC."""
    return HostTables(
        routes=[
            Route(ANY, ANY, gateway.ip, b1.device, 0),
            Route("169.254.0.0", "255.255.0.0", ANY, "eth1", 1000),
            Route(b2.network.network_address, b2.subnet_mask, ANY, b2.device, 2),
        ],
        arp_cache={gateway.ip: ArpEntry(gateway.mac)},
    )


def build_topology(cfg: ScenarioConfig) -> Topology:
    lan, wan = _iface(cfg, "router.LAN"), _iface(cfg, "router.WAN")
    srv = _iface(cfg, "server.S")
    server = Host(SERVER, "server", [srv], HostTables(
        routes=[Route(ANY, ANY, wan.ip, srv.device)],
        arp_cache={wan.ip: ArpEntry(wan.mac)},
    ))
    routes = cfg.static_routes
    if routes is None:
        routes = list(RELAY_HOST_ROUTES) if cfg.mode is Mode.HYBRID else []
    router = Router(lan, wan, list(routes))
    hosts = {SERVER: server}
    wifi_members = [f"{ROUTER}/LAN"]
    links = [Link("wan", LinkKind.ETHERNET, (f"{ROUTER}/WAN", f"{SERVER}/S"))]
    relay_cfg = spoof = bond = None
    relay_host = None

    if cfg.mode is Mode.WIFI_ONLY:
        b1 = _iface(cfg, "client.B-1")
        tables = HostTables(
            routes=[Route(ANY, ANY, lan.ip, b1.device), Route(b1.network.network_address, b1.subnet_mask, ANY, b1.device)],
            arp_cache={lan.ip: ArpEntry(lan.mac)},
        )
        hosts[CLIENT] = Host(CLIENT, "client", [b1], tables)
        wifi_members.append(f"{CLIENT}/B-1")
    elif cfg.mode is Mode.HYBRID:
        a1, a2 = _iface(cfg, "relay.A-1"), _iface(cfg, "relay.A-2")
        b1, b2 = _iface(cfg, "client.B-1"), _iface(cfg, "client.B-2")
        spoof = SpoofConfig(b2, b1, lan.mac, ip(cfg.phantom_gw_ip), mac(cfg.phantom_gw_mac))
        tables = install_spoof(hybrid_client_tables(b1, b2, lan), spoof)
        hosts[CLIENT] = Host(CLIENT, "client", [b1, b2], tables)
        hosts[RELAY] = Host(RELAY, "relay", [a1, a2], HostTables(), ip_forward=False)
        relay_cfg = RelayConfig(a1, a2, b1.ip, b2.mac, b2.ip, cfg.mtu)
        relay_host = RELAY
        wifi_members.append(f"{CLIENT}/B-1")
        links.append(Link("lan-eth", LinkKind.ETHERNET, (f"{ROUTER}/LAN", f"{RELAY}/A-1")))
        links.append(Link("vlc-down", LinkKind.VLC, (f"{RELAY}/A-2", f"{CLIENT}/B-2"), directed=True))
    else:
        c1, c2, logical = _iface(cfg, "client.C-1"), _iface(cfg, "client.C-2"), _iface(cfg, "client.bond0")
        tables = HostTables(
            routes=[Route(ANY, ANY, lan.ip, logical.device),
                    Route(logical.network.network_address, logical.subnet_mask, ANY, logical.device)],
        )
        hosts[CLIENT] = Host(CLIENT, "bond", [c1, c2, logical], tables)
        bond = BondSpec(CLIENT, logical.ip, logical.mac, ("C-1", "C-2"), "C-1", "C-2", cfg.bond_mode)
        wifi_members.append(f"{CLIENT}/C-2")
        links.append(Link("vlc", LinkKind.VLC, (f"{ROUTER}/LAN", f"{CLIENT}/C-1")))

    for k in range(1, cfg.contenders):
        sta = _station(k, lan)
        hosts[sta.name] = sta
        wifi_members.append(f"{sta.name}/W")
    links.insert(0, Link("bss", LinkKind.WIFI, tuple(wifi_members)))

    topo = Topology(
        mode=cfg.mode,
        hosts=hosts,
        router=router,
        links=links,
        channels=ChannelSet(cfg.wifi, cfg.vlc, cfg.blocking),
        client=CLIENT,
        server=SERVER,
        relay=relay_cfg,
        relay_host=relay_host,
        spoof=spoof,
        bond=bond,
        params=cfg.params,
    )
    validate(topo)
    return topo


def build_flows(cfg: ScenarioConfig) -> list[Flow]:
    """The configured flows, or the default workload.

    By default the client runs a bulk download (or a page load when ``page``
    is set) while every other station downloads for the whole run.
    """
    if cfg.flows is not None:
        return list(cfg.flows)
    if cfg.page is not None:
        main = Flow("page_load", CLIENT, SERVER, duration_s=cfg.duration_s, page=cfg.page, name="client")
    else:
        main = Flow("bulk", CLIENT, SERVER, duration_s=cfg.duration_s, name="client")
    flows = [main]
    # background downloads outlast the measured flow so contention never lets up early
    background = cfg.duration_s + BACKGROUND_MARGIN_S
    for k in range(1, cfg.contenders):
        flows.append(Flow("bulk", station_name(k), SERVER, duration_s=background, name=station_name(k)))
    return flows
