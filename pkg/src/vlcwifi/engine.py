"""Deterministic discrete-event engine.

Connection setup is simulated frame by frame: every SYN, SYN-ACK, ACK and
ARP message is a real :class:`~vlcwifi.frames.Frame` that passes through the
spoofing hook, the router's routing table, the relay and the bond exactly as
the code in those modules dictates. Once a connection is up, data moves as a
fluid at the bottleneck rate of its path; rates only change at events
(blocking edges, flows starting or finishing), so a run costs a handful of
events rather than one per packet.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
import random
from dataclasses import asdict, dataclass, field, replace
from ipaddress import IPv4Address
from typing import Callable

from .bond import BondInterface, SlaveState
from .channels import vlc_throughput, wifi_latency, wifi_per_user_throughput
from .checksum import PROTO_TCP
from .frames import (
    BROADCAST_MAC,
    ZERO_MAC,
    ArpMessage,
    ArpOp,
    Frame,
    MacAddr,
    TcpFlags,
    TcpSegment,
    arp_frame,
    rewrite,
    tcp_frame,
    verify_checksums,
)
from .relay import Relay, RelayStats
from .spoof import socket_match, source_address, route_lookup as host_route_lookup, uplink_rewrite
from .topology import ROUTER, Host, LinkKind, Mode, Topology, route_lookup, validate

SERVER_PORT = 5001


class ScenarioError(RuntimeError):
    pass


class DeadlockError(ScenarioError):
    """No event can fire but flows are still waiting."""


class UnreachableError(ScenarioError):
    """Path capacity is zero, so a transfer can never complete."""


@dataclass(frozen=True)
class PageSpec:
    object_count: int = 60
    total_bytes: int = 1_500_000
    sequential_rounds: int = 12

    def __post_init__(self) -> None:
        if self.object_count < 0 or self.total_bytes < 0 or self.sequential_rounds < 0:
            raise ValueError("page fields must be non-negative")


@dataclass(frozen=True)
class Flow:
    kind: str  # "bulk" or "page_load"
    client: str
    server: str = "server"
    duration_s: float = 5.0
    page: PageSpec | None = None
    start_s: float = 0.0
    name: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("bulk", "page_load"):
            raise ValueError(f"unknown flow kind {self.kind!r}")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.kind == "page_load" and self.page is None:
            object.__setattr__(self, "page", PageSpec())
        if not self.name:
            object.__setattr__(self, "name", f"{self.client}-{self.kind}")


def page_load_time(page: PageSpec, capacity: float, rtt: float) -> float:
    """Seconds to fetch ``page`` over a path of ``capacity`` Mbps and ``rtt`` ms."""
    if page.total_bytes == 0:
        return page.sequential_rounds * rtt / 1000.0
    if capacity <= 0:
        raise UnreachableError("path capacity is zero")
    return page.sequential_rounds * rtt / 1000.0 + 8.0 * page.total_bytes / (capacity * 1e6)


@dataclass(frozen=True)
class TraceEvent:
    time: float
    host: str
    iface: str
    action: str  # tx, rx, capture, drop, deliver
    summary: str

    def line(self) -> str:
        return f"{self.time:.6f} {self.host} {self.iface} {self.action} {self.summary}"


@dataclass
class FlowResult:
    name: str
    kind: str
    client: str
    mode: str
    throughput_mbps: float = 0.0
    page_load_time_s: float | None = None
    delivered_bits: float = 0.0
    sent_bits: float = 0.0
    established_at: float | None = None
    finished_at: float | None = None
    app_tuple: tuple[str, int, str, int] | None = None
    frames_delivered: int = 0
    socket_mismatches: int = 0


@dataclass
class ScenarioResult:
    mode: str
    seed: int
    flows: list[FlowResult]
    event_trace: list[TraceEvent]
    relay_stats: RelayStats | None = None
    bond_counters: dict[str, float] = field(default_factory=dict)
    spoof_counters: dict[str, int] = field(default_factory=dict)

    @property
    def per_flow_throughput(self) -> dict[str, float]:
        return {f.name: f.throughput_mbps for f in self.flows}

    def flow(self, name: str) -> FlowResult:
        for f in self.flows:
            if f.name == name:
                return f
        raise KeyError(f"flow {name!r} not found")

    def trace_text(self) -> str:
        return "".join(e.line() + "\n" for e in self.event_trace)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "flows": [asdict(f) for f in self.flows],
            "relay_stats": asdict(self.relay_stats) if self.relay_stats else None,
            "bond_counters": self.bond_counters,
            "spoof_counters": self.spoof_counters,
            "trace": [e.line() for e in self.event_trace],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# nodes


class Node:
    def __init__(self, sim: "Simulation", name: str):
        self.sim = sim
        self.name = name

    def receive(self, frame: Frame, iface: str) -> None:
        raise NotImplementedError

    def send(self, frame: Frame, iface: str) -> None:
        self.sim.transmit(self.name, iface, frame)

    def answer_arp(self, frame: Frame, iface: str, nic) -> bool:
        """Kernel ARP: reply to requests for ``nic``'s address. True if the frame was ARP."""
        arp = frame.arp
        if arp is None:
            return False
        if arp.is_request and arp.target_ip == nic.ip:
            reply = ArpMessage(ArpOp.REPLY, nic.mac, nic.ip, arp.sender_mac, arp.sender_ip)
            self.send(arp_frame(reply), iface)
        return True


class ServerNode(Node):
    """Answers handshakes; data leaves at the fluid rate."""

    def __init__(self, sim, host: Host):
        super().__init__(sim, host.name)
        self.host = host
        self.nic = host.interfaces[0]

    def receive(self, frame: Frame, iface: str) -> None:
        if self.answer_arp(frame, iface, self.nic):
            return
        pkt, seg = frame.ipv4, frame.transport
        if pkt is None or not isinstance(seg, TcpSegment) or pkt.dst != self.nic.ip:
            return
        gw = host_route_lookup(self.host.tables, pkt.src).gateway
        dst_mac = self.host.tables.arp_cache[gw].mac
        if seg.flags & TcpFlags.SYN and not seg.flags & TcpFlags.ACK:
            reply = tcp_frame(
                self.nic.mac, dst_mac, self.nic.ip, pkt.src, seg.dst_port, seg.src_port,
                TcpFlags.SYN | TcpFlags.ACK, seq=7000, ack=seg.seq + 1,
            )
            self.send(reply, iface)


class ClientNode(Node):
    """An end host; with a spoof config it runs the capture hook on the VLC NIC."""

    def __init__(self, sim, host: Host, spoof=None):
        super().__init__(sim, host.name)
        self.host = host
        self.spoof = spoof
        self.by_device = {nic.device: nic for nic in host.interfaces}
        self.conns: dict[int, "Connection"] = {}
        self.counters = {"captured": 0, "rewritten": 0, "skipped": 0}

    def local_ips(self) -> set[IPv4Address]:
        return {nic.ip for nic in self.host.interfaces}

    def connect(self, conn: "Connection") -> None:
        tables = self.host.tables
        server_ip = conn.server_ip
        local_ip = source_address(tables, self.host.interfaces, server_ip)
        tables.listen(local_ip, conn.local_port, PROTO_TCP)
        conn.local_ip = local_ip
        self.conns[conn.local_port] = conn
        route = host_route_lookup(tables, server_ip)
        nic = self.by_device[route.iface]
        hop = route.gateway if int(route.gateway) else server_ip
        syn = tcp_frame(nic.mac, tables.arp_cache[hop].mac, local_ip, server_ip,
                        conn.local_port, SERVER_PORT, TcpFlags.SYN, seq=1000)
        self.emit(syn, nic.name)

    def emit(self, frame: Frame, iface: str) -> None:
        if self.spoof is not None and iface == self.spoof.vlc_if.name:
            # frame never reaches the VLC wire: the phantom gateway does not exist
            self.counters["captured"] += 1
            self.sim.record(self.name, iface, "capture", frame.summary())
            out = uplink_rewrite(frame, self.spoof)
            if out is None:
                self.counters["skipped"] += 1
                return
            self.counters["rewritten"] += 1
            self.send(out, self.spoof.wifi_if.name)
            return
        self.send(frame, iface)

    def receive(self, frame: Frame, iface: str) -> None:
        if self.spoof is not None and iface == self.spoof.vlc_if.name:
            # the capture also returns received frames; the source filter drops them
            self.counters["captured"] += 1
            if uplink_rewrite(frame, self.spoof) is None:
                self.counters["skipped"] += 1
        if self.answer_arp(frame, iface, self.host.iface(iface)):
            return
        pkt, seg = frame.ipv4, frame.transport
        if pkt is None or pkt.dst not in self.local_ips() or not isinstance(seg, TcpSegment):
            return
        conn = self.conns.get(seg.dst_port)
        if not verify_checksums(frame) or not socket_match(self.host.tables, frame) or conn is None:
            if conn is not None:
                conn.result.socket_mismatches += 1
            self.sim.record(self.name, iface, "drop", "no socket: " + frame.summary())
            return
        conn.result.frames_delivered += 1
        self.sim.record(self.name, iface, "deliver", frame.summary())
        if seg.flags & TcpFlags.SYN and seg.flags & TcpFlags.ACK:
            conn.result.app_tuple = (str(conn.local_ip), conn.local_port, str(pkt.src), seg.src_port)
            route = host_route_lookup(self.host.tables, pkt.src)
            nic = self.by_device[route.iface]
            hop = route.gateway if int(route.gateway) else pkt.src
            ack = tcp_frame(nic.mac, self.host.tables.arp_cache[hop].mac, conn.local_ip, pkt.src,
                            conn.local_port, seg.src_port, TcpFlags.ACK, seq=seg.ack, ack=seg.seq + 1)
            self.emit(ack, nic.name)
            self.sim.established(conn)


class RelayNode(Node):
    def __init__(self, sim, host: Host, relay: Relay):
        super().__init__(sim, host.name)
        self.host = host
        self.relay = relay

    def receive(self, frame: Frame, iface: str) -> None:
        cfg = self.relay.config
        if iface != cfg.capture_if.name:
            return
        # the kernel still answers ARP for A-1; the raw capture sees the frame too
        self.answer_arp(frame, iface, cfg.capture_if)
        out = self.relay.process(frame)
        if out is not None:
            self.send(out, cfg.emit_if.name)


class BondNode(Node):
    """Bond host: one logical IP over a VLC slave and a WiFi slave."""

    def __init__(self, sim, host: Host, bond: BondInterface):
        super().__init__(sim, host.name)
        self.host = host
        self.bond = bond
        self.conns: dict[int, "Connection"] = {}
        self.pending: list[tuple[IPv4Address, Frame]] = []
        self.counters = {"arp_intercepted": 0, "arp_updates": 0}

    def _slave_name(self, idx: int) -> str:
        return self.bond.slaves[idx].if_id.name

    def _send_ip(self, frame: Frame, hop: IPv4Address) -> None:
        entry = self.host.tables.arp_cache.get(hop)
        if entry is None:
            if not any(h == hop for h, _ in self.pending):
                req = ArpMessage(ArpOp.REQUEST, self.bond.logical_mac, self.bond.logical_ip, ZERO_MAC, hop)
                self.bond.record_arp_request(req)
                f = arp_frame(req)
                self.send(f, self._slave_name(self.bond.transmit(f)))
            self.pending.append((hop, frame))
            return
        idx = self.bond.transmit(frame)
        out = rewrite(frame, dst_mac=entry.mac, src_mac=self.bond.slaves[idx].mac)
        self.send(out, self._slave_name(idx))

    def send_arp_updates(self, messages: list[ArpMessage]) -> None:
        for msg in messages:
            self.counters["arp_updates"] += 1
            idx = next(i for i, s in enumerate(self.bond.slaves) if s.mac == msg.sender_mac)
            dst = msg.target_mac if not msg.target_mac.is_zero else BROADCAST_MAC
            self.send(arp_frame(msg, dst_mac=dst), self._slave_name(idx))

    def connect(self, conn: "Connection") -> None:
        tables = self.host.tables
        local_ip = self.bond.logical_ip
        tables.listen(local_ip, conn.local_port, PROTO_TCP)
        conn.local_ip = local_ip
        self.conns[conn.local_port] = conn
        route = host_route_lookup(tables, conn.server_ip)
        hop = route.gateway if int(route.gateway) else conn.server_ip
        syn = tcp_frame(self.bond.logical_mac, ZERO_MAC, local_ip, conn.server_ip,
                        conn.local_port, SERVER_PORT, TcpFlags.SYN, seq=1000)
        self._send_ip(syn, hop)

    def receive(self, frame: Frame, iface: str) -> None:
        if not (self.bond.owns_mac(frame.dst_mac) or frame.dst_mac.is_broadcast):
            return
        arp = frame.arp
        if arp is not None:
            self._receive_arp(arp)
            return
        pkt, seg = frame.ipv4, frame.transport
        if pkt is None or pkt.dst != self.bond.logical_ip or not isinstance(seg, TcpSegment):
            return
        conn = self.conns.get(seg.dst_port)
        if not verify_checksums(frame) or not socket_match(self.host.tables, frame) or conn is None:
            if conn is not None:
                conn.result.socket_mismatches += 1
            self.sim.record(self.name, iface, "drop", "no socket: " + frame.summary())
            return
        conn.result.frames_delivered += 1
        self.sim.record(self.name, iface, "deliver", frame.summary())
        if seg.flags & TcpFlags.SYN and seg.flags & TcpFlags.ACK:
            conn.result.app_tuple = (str(conn.local_ip), conn.local_port, str(pkt.src), seg.src_port)
            route = host_route_lookup(self.host.tables, pkt.src)
            hop = route.gateway if int(route.gateway) else pkt.src
            ack = tcp_frame(self.bond.logical_mac, ZERO_MAC, conn.local_ip, pkt.src,
                            conn.local_port, seg.src_port, TcpFlags.ACK, seq=seg.ack, ack=seg.seq + 1)
            self._send_ip(ack, hop)
            self.sim.established(conn)

    def _receive_arp(self, arp: ArpMessage) -> None:
        if arp.is_request and arp.target_ip == self.bond.logical_ip:
            reply = ArpMessage(ArpOp.REPLY, self.bond.logical_mac, self.bond.logical_ip, arp.sender_mac, arp.sender_ip)
            reply = self.bond.intercept_arp_response(reply, self.sim.peer_load_estimate())
            self.counters["arp_intercepted"] += 1
            idx = next(i for i, s in enumerate(self.bond.slaves) if s.mac == reply.sender_mac)
            self.send(arp_frame(reply), self._slave_name(idx))
        elif arp.is_reply and arp.target_ip == self.bond.logical_ip:
            self.host.tables.learn(arp.sender_ip, arp.sender_mac)
            update = self.bond.on_peer_arp_reply(arp, self.sim.peer_load_estimate())
            if update is not None:
                self.send_arp_updates([update])
            waiting, self.pending = self.pending, []
            for hop, frame in waiting:
                self._send_ip(frame, hop)


class RouterNode(Node):
    def __init__(self, sim, topo: Topology):
        super().__init__(sim, ROUTER)
        self.router = topo.router
        self.arp = dict(self.router.arp_cache)
        self.pending: list[tuple[IPv4Address, Frame]] = []

    def receive(self, frame: Frame, iface: str) -> None:
        arp = frame.arp
        if arp is not None:
            self._receive_arp(arp, iface)
            return
        pkt = frame.ipv4
        if pkt is None or pkt.ttl <= 1:
            return
        mine = self.router.lan if iface == "LAN" else self.router.wan
        if frame.dst_mac != mine.mac:
            return
        hop = route_lookup(self.router, pkt.dst)
        self._forward(rewrite(frame, ttl=pkt.ttl - 1), hop.port, hop.address)

    def _forward(self, frame: Frame, port: str, hop: IPv4Address) -> None:
        nic = self.router.lan if port == "LAN" else self.router.wan
        dst = self.arp.get(hop)
        if dst is None:
            if not any(h == hop for h, _ in self.pending):
                req = ArpMessage(ArpOp.REQUEST, nic.mac, nic.ip, ZERO_MAC, hop)
                self.send(arp_frame(req), port)
            self.pending.append((hop, frame))
            return
        self.send(rewrite(frame, dst_mac=dst, src_mac=nic.mac), port)

    def _receive_arp(self, arp: ArpMessage, iface: str) -> None:
        nic = self.router.lan if iface == "LAN" else self.router.wan
        if arp.target_ip == nic.ip or arp.sender_ip in self.arp:
            self.arp[arp.sender_ip] = arp.sender_mac
        if arp.is_request and arp.target_ip == nic.ip:
            reply = ArpMessage(ArpOp.REPLY, nic.mac, nic.ip, arp.sender_mac, arp.sender_ip)
            self.send(arp_frame(reply), iface)
        waiting, self.pending = self.pending, []
        for hop, frame in waiting:
            port = "LAN" if hop in self.router.lan.network else "WAN"
            self._forward(frame, port, hop)


# ---------------------------------------------------------------------------
# links


@dataclass
class Segment:
    name: str
    kind: LinkKind
    members: list[tuple[str, str]]
    directed: bool = False


@dataclass
class Connection:
    flow: Flow
    result: FlowResult
    server_ip: IPv4Address
    local_port: int
    local_ip: IPv4Address | None = None
    rate: float = 0.0  # Mbps
    data_start: float | None = None
    page_done_at: float | None = None
    active: bool = False
    finished: bool = False


# ---------------------------------------------------------------------------


class Simulation:
    def __init__(self, topo: Topology, flows: list[Flow], seed: int):
        validate(topo)
        self.topo = topo
        self.flows = list(flows)
        self.seed = seed
        self.rng = random.Random(seed)
        p = topo.params
        self.wifi_factor = min(1.25, max(0.75, self.rng.gauss(1.0, p.wifi_jitter)))
        self.vlc_factor = min(1.05, max(0.95, self.rng.gauss(1.0, p.vlc_jitter)))
        self.latency_factor = self.rng.gammavariate(p.latency_shape, 1.0 / p.latency_shape)
        sched = topo.channels.blocking
        offset = self.rng.uniform(0.0, 60.0)
        self.blocking = replace(sched, offset_s=offset) if p.randomize_block_offset else sched
        self.now = 0.0
        self.queue: list[tuple[float, int, Callable, tuple]] = []
        self.counter = itertools.count()
        self.trace: list[TraceEvent] = []
        self.conns: list[Connection] = []
        self.last_advance = 0.0
        self._build_nodes()
        self._build_segments()

    # -- construction ----------------------------------------------------

    def _build_nodes(self) -> None:
        topo = self.topo
        self.nodes: dict[str, Node] = {ROUTER: RouterNode(self, topo)}
        self.relay: Relay | None = None
        self.bond: BondInterface | None = None
        self.client_node: Node | None = None
        for host in topo.hosts.values():
            if host.role == "server":
                node = ServerNode(self, host)
            elif host.role == "relay":
                self.relay = Relay(topo.relay)
                node = RelayNode(self, host, self.relay)
            elif host.role == "bond":
                spec = topo.bond
                slaves = [SlaveState(host.iface(s), 0.0) for s in spec.slaves]
                self.bond = BondInterface(spec.logical_ip, spec.logical_mac, slaves)
                node = BondNode(self, host, self.bond)
            else:
                spoof = topo.spoof if host.name == topo.client and topo.mode is Mode.HYBRID else None
                node = ClientNode(self, host, spoof)
            self.nodes[host.name] = node
        self.client_node = self.nodes[topo.client]

    def _build_segments(self) -> None:
        self.segments: list[Segment] = []
        self.attached: dict[tuple[str, str], list[Segment]] = {}
        self.mac_at: dict[MacAddr, Segment] = {}
        for link in self.topo.links:
            seg = Segment(link.name, link.kind, [self.topo.endpoint(r) for r in link.endpoints], link.directed)
            self.segments.append(seg)
            for m in seg.members:
                self.attached.setdefault(m, []).append(seg)
                if m[0] != ROUTER:
                    self.mac_at[self.topo.hosts[m[0]].iface(m[1]).mac] = seg

    # -- channel state ---------------------------------------------------

    def n_wifi_stations(self) -> int:
        return max(1, len({c.flow.client for c in self.conns if c.active}))

    def wifi_share(self) -> float:
        return wifi_per_user_throughput(self.topo.channels.wifi, self.n_wifi_stations()) * self.wifi_factor

    def wifi_one_way_ms(self) -> float:
        return wifi_latency(self.topo.channels.wifi, self.n_wifi_stations()) * self.latency_factor

    def vlc_blocked(self, t: float) -> bool:
        return self.blocking.is_blocked(t)

    def _blocked(self, t0: float, t1: float) -> list[tuple[float, float]]:
        return self.blocking.intervals(t0, t1)

    def vlc_rate(self) -> float:
        if self.vlc_blocked(self.now):
            return 0.0
        return vlc_throughput(self.topo.channels.vlc) * self.vlc_factor

    def next_unblock(self, t: float) -> float | None:
        if self.blocking.blocked_seconds_per_minute >= 60.0:
            return None
        for a, b in self._blocked(t - 60.0, t + 120.0):
            if a <= t < b:
                return b
        return t

    def latency_ms(self, kind: LinkKind) -> float:
        if kind is LinkKind.WIFI:
            return self.wifi_one_way_ms()
        if kind is LinkKind.VLC:
            return self.topo.channels.vlc.one_way_latency
        return self.topo.params.ethernet_latency_ms

    # -- scheduling ------------------------------------------------------

    def schedule(self, at: float, fn: Callable, *args) -> None:
        heapq.heappush(self.queue, (at, next(self.counter), fn, args))

    def record(self, host: str, iface: str, action: str, summary: str) -> None:
        self.trace.append(TraceEvent(round(self.now, 9), host, iface, action, summary))

    def transmit(self, host: str, iface: str, frame: Frame) -> None:
        segs = self.attached.get((host, iface), [])
        if host == ROUTER and iface == "LAN":
            known = self.mac_at.get(frame.dst_mac)
            if self.bond is not None and frame.dst_mac == self.bond.logical_mac:
                # the logical MAC follows the primary slave, as on failover
                primary = self.bond.slaves[self.bond.up_slaves()[0]] if self.bond.up_slaves() else None
                known = self.mac_at.get(primary.mac) if primary else None
            if known is not None and known in segs:
                segs = [known]
        sent = False
        for seg in segs:
            if seg.directed and seg.members[0] != (host, iface):
                continue
            t = self.now
            if seg.kind is LinkKind.VLC:
                t = self.next_unblock(self.now)
                if t is None:
                    self.record(host, iface, "drop", "link blocked: " + frame.summary())
                    continue
            arrive = t + self.latency_ms(seg.kind) / 1000.0
            for member in seg.members:
                if member == (host, iface):
                    continue
                if not self._accepts(member, frame):
                    continue
                self.schedule(arrive, self._deliver, member, frame)
            sent = True
        if sent:
            self.record(host, iface, "tx", frame.summary())
        if host == ROUTER or sent:
            return
        self.record(host, iface, "drop", "no link: " + frame.summary())

    def _accepts(self, member: tuple[str, str], frame: Frame) -> bool:
        if frame.dst_mac.is_broadcast:
            return True
        host, nic = member
        if host == ROUTER:
            r = self.topo.router
            return frame.dst_mac == (r.lan.mac if nic == "LAN" else r.wan.mac)
        node = self.nodes[host]
        if isinstance(node, BondNode):
            return node.bond.owns_mac(frame.dst_mac)
        return frame.dst_mac == self.topo.hosts[host].iface(nic).mac

    def _deliver(self, member: tuple[str, str], frame: Frame) -> None:
        host, nic = member
        self.record(host, nic, "rx", frame.summary())
        self.nodes[host].receive(frame, nic)

    # -- flows -----------------------------------------------------------

    def peer_load_estimate(self) -> float:
        return 0.0 if not any(c.data_start is not None for c in self.conns) else self.total_bond_capacity()

    def total_bond_capacity(self) -> float:
        return sum(s.capacity_estimate for s in self.bond.slaves if s.up) if self.bond else 0.0

    def _start_flow(self, conn: Connection) -> None:
        self._advance()
        conn.active = True
        self._refresh()
        self.nodes[conn.flow.client].connect(conn)

    def established(self, conn: Connection) -> None:
        if conn.data_start is not None:
            return
        self._advance()
        conn.data_start = self.now
        conn.result.established_at = self.now
        if conn.flow.kind == "page_load":
            self._schedule_page(conn)
        else:
            # like iperf, the measured interval starts once the connection is up
            self.schedule(self.now + conn.flow.duration_s, self._finish, conn)
        if self.bond is not None and conn.flow.client == self.topo.bond.host:
            # bulk demand saturates the bond: the peer's load is what it can take
            for peer in list(self.bond.peer_assignments):
                self.bond.update_peer_load(peer, self.total_bond_capacity())
        self._refresh()

    def _schedule_page(self, conn: Connection) -> None:
        cap, rtt = self.path_capacity(conn), self.page_rtt_ms(conn)
        if cap <= 0:
            conn.page_done_at = math.nan
            return
        conn.page_done_at = self.now + page_load_time(conn.flow.page, cap, rtt)
        conn.rate = cap
        self.schedule(conn.page_done_at, self._finish, conn)

    def page_rtt_ms(self, conn: Connection) -> float:
        mode = self.mode_of(conn)
        wifi = self.wifi_one_way_ms()
        vlc = self.topo.channels.vlc.one_way_latency
        eth = self.topo.params.ethernet_latency_ms
        if mode is Mode.WIFI_ONLY:
            return 2 * wifi
        if mode is Mode.HYBRID:
            return wifi + 2 * eth + vlc
        # requests are spread by transmit balancing; a round lasts as long as its slowest slave
        page = conn.flow.page
        rounds = max(1, page.sequential_rounds)
        per_round = max(1, math.ceil(page.object_count / rounds)) if page.object_count else 0
        rtts = {self.topo.bond.vlc_slave: 2 * vlc, self.topo.bond.wifi_slave: 2 * wifi}
        probe = tcp_frame(self.bond.logical_mac, ZERO_MAC, self.bond.logical_ip, conn.server_ip,
                          conn.local_port, SERVER_PORT, TcpFlags.ACK | TcpFlags.PSH, payload=bytes(400))
        total = 0.0
        for _ in range(rounds):
            used = {self.bond.slaves[self.bond.transmit(probe)].if_id.name for _ in range(per_round)}
            total += max((rtts[s] for s in used), default=0.0)
        return total / rounds

    def mode_of(self, conn: Connection) -> Mode:
        return self.topo.mode if conn.flow.client == self.topo.client else Mode.WIFI_ONLY

    def path_capacity(self, conn: Connection) -> float:
        mode = self.mode_of(conn)
        p = self.topo.params
        share = self.wifi_share()
        if mode is Mode.WIFI_ONLY:
            return share
        vlc = self.vlc_rate() * p.vlc_path_efficiency
        if mode is Mode.HYBRID:
            return min(vlc, share / p.ack_ratio)
        return sum(self.bond.allocate_receive_load(math.inf))

    def _update_bond(self) -> None:
        if self.bond is None:
            return
        spec = self.topo.bond
        vi, wi = self.bond.slave_index(spec.vlc_slave), self.bond.slave_index(spec.wifi_slave)
        vlc = self.vlc_rate() * self.topo.params.vlc_path_efficiency
        self.bond.set_capacity(vi, vlc)
        self.bond.set_capacity(wi, self.wifi_share())
        was_up = self.bond.slaves[vi].up
        self.bond.set_slave_up(vi, vlc > 0)
        if was_up != (vlc > 0) and self.bond.peer_assignments:
            self.nodes[spec.host].send_arp_updates(self.bond.rebalance())

    def _advance(self) -> None:
        dt = self.now - self.last_advance
        if dt > 0:
            for c in self.conns:
                if c.active and c.data_start is not None and c.flow.kind == "bulk":
                    c.result.delivered_bits += c.rate * 1e6 * dt
        self.last_advance = self.now

    def _refresh(self) -> None:
        self._update_bond()
        for c in self.conns:
            if c.active and c.data_start is not None and c.flow.kind == "bulk":
                c.rate = self.path_capacity(c)

    def _finish(self, conn: Connection) -> None:
        if conn.finished:
            return
        self._advance()
        conn.finished = True
        conn.active = False
        res = conn.result
        res.finished_at = self.now
        if conn.flow.kind == "bulk":
            res.throughput_mbps = res.delivered_bits / conn.flow.duration_s / 1e6
            in_flight = conn.rate * 1e6 * self.downlink_latency_ms(conn) / 1000.0
            res.sent_bits = res.delivered_bits + in_flight
        else:
            res.page_load_time_s = self.now - conn.flow.start_s
            res.delivered_bits = res.sent_bits = 8.0 * conn.flow.page.total_bytes
        self._refresh()

    def _expire(self, conn: Connection) -> None:
        # a flow that never connected reports zero throughput
        if conn.data_start is None:
            self._finish(conn)

    def downlink_latency_ms(self, conn: Connection) -> float:
        mode = self.mode_of(conn)
        if mode is Mode.WIFI_ONLY:
            return self.wifi_one_way_ms()
        return self.topo.channels.vlc.one_way_latency

    def _capacity_edge(self) -> None:
        self._advance()
        self._refresh()
        for c in self.conns:
            if c.flow.kind == "page_load" and c.page_done_at is not None and math.isnan(c.page_done_at):
                self._schedule_page(c)

    # -- main loop -------------------------------------------------------

    def run(self) -> ScenarioResult:
        horizon = 0.0
        for i, flow in enumerate(self.flows):
            if flow.client not in self.nodes or not isinstance(self.nodes[flow.client], (ClientNode, BondNode)):
                raise ScenarioError(f"flow {flow.name}: {flow.client!r} is not a client host")
            server = self.topo.hosts.get(flow.server)
            if server is None or server.role != "server":
                raise ScenarioError(f"flow {flow.name}: {flow.server!r} is not a server host")
            res = FlowResult(flow.name, flow.kind, flow.client, self.mode_of_flow(flow).value)
            conn = Connection(flow, res, server.interfaces[0].ip, 40000 + i)
            self.conns.append(conn)
            self.schedule(flow.start_s, self._start_flow, conn)
            if flow.kind == "bulk":
                self.schedule(flow.start_s + flow.duration_s, self._expire, conn)
            horizon = max(horizon, flow.start_s + flow.duration_s)
        for a, b in self._blocked(0.0, horizon + 60.0):
            for edge in (a, b):
                if edge > 0:
                    self.schedule(edge, self._capacity_edge)

        while self.queue:
            if all(c.finished for c in self.conns):
                break
            at, _, fn, args = heapq.heappop(self.queue)
            self.now = at
            fn(*args)
        waiting = [c.flow.name for c in self.conns if not c.finished]
        if waiting:
            raise DeadlockError(f"no event can fire; waiting flows: {', '.join(waiting)}")
        bond_counters: dict[str, float] = {}
        spoof_counters: dict[str, int] = {}
        if self.bond is not None:
            node = self.nodes[self.topo.bond.host]
            bond_counters = dict(node.counters)
            for s in self.bond.slaves:
                bond_counters[f"tx_mbit_{s.if_id.name}"] = round(s.tx_load, 9)
        if isinstance(self.client_node, ClientNode) and self.client_node.spoof is not None:
            spoof_counters = dict(self.client_node.counters)
        return ScenarioResult(
            mode=self.topo.mode.value,
            seed=self.seed,
            flows=[c.result for c in self.conns],
            event_trace=self.trace,
            relay_stats=self.relay.stats if self.relay else None,
            bond_counters=bond_counters,
            spoof_counters=spoof_counters,
        )

    def mode_of_flow(self, flow: Flow) -> Mode:
        return self.topo.mode if flow.client == self.topo.client else Mode.WIFI_ONLY


def run_scenario(topology: Topology, flows: list[Flow], seed: int = 0) -> ScenarioResult:
    return Simulation(topology, flows, seed).run()


# ---------------------------------------------------------------------------
# path reports


@dataclass(frozen=True)
class PathReport:
    uplink: list[str]
    downlink: list[str]
    uplink_capture: str | None = None

    def describe(self) -> str:
        up = ([f"{self.uplink_capture}-capture"] if self.uplink_capture else []) + self.uplink
        return f"uplink: {' -> '.join(up)}\ndownlink: {' -> '.join(self.downlink)}\n"


def _hops(events: list[TraceEvent]) -> list[str]:
    out: list[str] = []
    for e in events:
        if e.action in ("tx", "rx") and (not out or out[-1] != e.iface):
            out.append(e.iface)
    return out


def trace_handshake(result: ScenarioResult, flow: Flow | str) -> PathReport:
    """Interfaces crossed by a flow's SYN (client to WAN) and SYN-ACK (router LAN to client)."""
    name = flow if isinstance(flow, str) else flow.name
    res = result.flow(name)
    if res.app_tuple is None:
        raise ScenarioError(f"flow {name!r} never completed its handshake")
    port = f":{res.app_tuple[1]} "
    syn = [e for e in result.event_trace if "[SYN]" in e.summary and port in e.summary]
    synack = [e for e in result.event_trace if "[SYN|ACK]" in e.summary and f":{res.app_tuple[1]} [" in e.summary]
    capture = next((e.iface for e in syn if e.action == "capture"), None)
    up_events = []
    for e in syn:
        if e.host == "server":
            break
        up_events.append(e)
        if e.host == ROUTER and e.iface == "WAN":
            break
    down_events = []
    started = False
    for e in synack:
        if e.host == ROUTER and e.iface == "LAN" and e.action == "tx":
            started = True
        if started:
            down_events.append(e)
    return PathReport(_hops(up_events), _hops(down_events), capture)
