"""Adaptive load balancing over a WiFi slave and a VLC slave.

Only the adaptive-load-balancing behaviour is emulated. Round-robin, XOR and
802.3ad need switch support; active-backup caps throughput at the best slave;
broadcast duplicates frames. Adaptive load balancing needs nothing from the
peer or the switch: transmit traffic is spread by slave utilization, and
receive traffic is steered by answering ARP with a per-slave MAC address
while every peer only ever learns the one logical IP.

Loads and capacities are in Mbps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from ipaddress import IPv4Address

from .frames import ArpMessage, ArpOp, Frame, MacAddr, ZERO_MAC, ip, mac
from .netif import InterfaceIdentity

MODE_LABELS = {"adaptive-load-balancing", "balance-alb", "6"}

# exhaustive rebalance search bound, greedy beyond it
_EXHAUSTIVE_LIMIT = 4096
_EPS = 1e-9


class BondError(RuntimeError):
    pass


@dataclass
class SlaveState:
    if_id: InterfaceIdentity
    capacity_estimate: float
    assigned_rx_load: float = 0.0
    up: bool = True
    tx_load: float = 0.0

    @property
    def mac(self) -> MacAddr:
        return self.if_id.mac

    @property
    def exhausted(self) -> bool:
        return self.assigned_rx_load >= self.capacity_estimate

    @property
    def tx_utilization(self) -> float:
        if self.capacity_estimate <= 0:
            return math.inf
        return self.tx_load / self.capacity_estimate


def smooth_load(previous: float, observed: float, dt_s: float, period_s: float = 0.1) -> float:
    """Exponential smoothing with weight 0.5 per ``period_s`` of elapsed time."""
    keep = 0.5 ** (dt_s / period_s)
    return keep * previous + (1.0 - keep) * observed


def _utilization(load: float, capacity: float) -> float:
    if load <= 0:
        return 0.0
    return math.inf if capacity <= 0 else load / capacity


@dataclass
class BondInterface:
    logical_ip: IPv4Address
    logical_mac: MacAddr
    slaves: list[SlaveState]
    peer_assignments: dict[IPv4Address, int] = field(default_factory=dict)
    peer_loads: dict[IPv4Address, float] = field(default_factory=dict)
    # peer IP -> peer MAC once its reply arrived (None while pending)
    saved_peer_info: dict[IPv4Address, MacAddr | None] = field(default_factory=dict)
    # MAC each peer currently associates with logical_ip
    peer_view: dict[IPv4Address, MacAddr] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.logical_ip = ip(self.logical_ip)
        self.logical_mac = mac(self.logical_mac)
        if not self.slaves:
            raise BondError("a bond needs at least one slave")
        names = [s.if_id.name for s in self.slaves]
        if len(set(names)) != len(names):
            raise BondError(f"duplicate slave names {names}")

    # -- slave bookkeeping -------------------------------------------------

    def up_slaves(self) -> list[int]:
        return [i for i, s in enumerate(self.slaves) if s.up]

    def slave_index(self, name: str) -> int:
        for i, s in enumerate(self.slaves):
            if s.if_id.name == name:
                return i
        raise KeyError(name)

    def set_slave_up(self, idx: int, up: bool) -> None:
        self.slaves[idx].up = up

    def set_capacity(self, idx: int, capacity: float) -> None:
        self.slaves[idx].capacity_estimate = max(0.0, capacity)

    def total_assigned(self) -> float:
        return sum(s.assigned_rx_load for s in self.slaves)

    def owns_mac(self, hw: MacAddr) -> bool:
        return hw == self.logical_mac or any(s.mac == hw for s in self.slaves)

    def _primary(self) -> int:
        up = self.up_slaves()
        if not up:
            raise BondError("all slaves are down")
        return up[0]

    def _assign(self, peer: IPv4Address, idx: int, load: float) -> None:
        old = self.peer_assignments.get(peer)
        if old is not None:
            self.slaves[old].assigned_rx_load -= self.peer_loads.get(peer, 0.0)
            if abs(self.slaves[old].assigned_rx_load) < _EPS:
                self.slaves[old].assigned_rx_load = 0.0
        self.peer_assignments[peer] = idx
        self.peer_loads[peer] = load
        self.slaves[idx].assigned_rx_load += load

    def _choose_rx_slave(self, load: float) -> int:
        """Widest slave that still has room, else the least utilized one."""
        up = self.up_slaves()
        if not up:
            raise BondError("all slaves are down")
        widest_first = sorted(up, key=lambda i: (-self.slaves[i].capacity_estimate, i))
        for i in widest_first:
            s = self.slaves[i]
            if not s.exhausted and s.assigned_rx_load + load <= s.capacity_estimate:
                return i
        return min(
            widest_first,
            key=lambda i: (_utilization(self.slaves[i].assigned_rx_load + load, self.slaves[i].capacity_estimate),
                           -self.slaves[i].capacity_estimate, i),
        )

    def _bind_peer(self, peer: IPv4Address, load: float) -> int:
        if peer in self.peer_assignments:
            # take the peer's own load out before choosing again
            self._assign(peer, self.peer_assignments[peer], 0.0)
        idx = self._choose_rx_slave(load)
        self._assign(peer, idx, load)
        self.peer_view[peer] = self.slaves[idx].mac
        return idx

    # -- ARP negotiation ---------------------------------------------------

    def intercept_arp_response(self, arp: ArpMessage, est_peer_load: float = 0.0) -> ArpMessage:
        """Rewrite an outgoing ARP reply so the peer learns one slave's MAC."""
        if not arp.is_reply or arp.sender_ip != self.logical_ip:
            raise BondError("only ARP replies for the bond address are intercepted")
        idx = self._bind_peer(arp.target_ip, est_peer_load)
        return replace(arp, sender_mac=self.slaves[idx].mac)

    def record_arp_request(self, arp: ArpMessage) -> "BondInterface":
        """Remember whom the bond host asked for.

        The request carries the logical MAC, which the peer learns; until an
        updated reply arrives its traffic lands on the slave owning that MAC.
        """
        if not arp.is_request or arp.sender_ip != self.logical_ip:
            return self
        peer = arp.target_ip
        self.saved_peer_info.setdefault(peer, None)
        if peer not in self.peer_assignments:
            self._assign(peer, self._primary(), 0.0)
        self.peer_view[peer] = arp.sender_mac
        return self

    def on_peer_arp_reply(self, arp: ArpMessage, est_peer_load: float = 0.0) -> ArpMessage | None:
        """Learn a saved peer's MAC and bind it to a slave; None for unknown peers."""
        if not arp.is_reply or arp.sender_ip not in self.saved_peer_info:
            return None
        peer = arp.sender_ip
        self.saved_peer_info[peer] = arp.sender_mac
        idx = self._bind_peer(peer, est_peer_load)
        return ArpMessage(ArpOp.REPLY, self.slaves[idx].mac, self.logical_ip, arp.sender_mac, peer)

    def _peer_mac(self, peer: IPv4Address) -> MacAddr:
        return self.saved_peer_info.get(peer) or ZERO_MAC

    def _cost(self, assignment: dict[IPv4Address, int]) -> float:
        sums = [0.0] * len(self.slaves)
        for peer, idx in assignment.items():
            sums[idx] += self.peer_loads.get(peer, 0.0)
        return max(_utilization(sums[i], s.capacity_estimate) for i, s in enumerate(self.slaves) if s.up)

    def _best_assignment(self, peers: list[IPv4Address]) -> dict[IPv4Address, int]:
        up = self.up_slaves()
        current = self.peer_assignments
        if len(up) ** len(peers) <= _EXHAUSTIVE_LIMIT:
            best_key = None
            best: dict[IPv4Address, int] = {}
            for combo in itertools.product(up, repeat=len(peers)):
                cand = dict(zip(peers, combo))
                moves = sum(cand[p] != current.get(p) for p in peers)
                key = (round(self._cost(cand), 12), moves)
                if best_key is None or key < best_key:
                    best_key, best = key, cand
            return best
        # longest-load-first greedy
        sums = {i: 0.0 for i in up}
        out = {}
        for p in sorted(peers, key=lambda p: (-self.peer_loads.get(p, 0.0), peers.index(p))):
            load = self.peer_loads.get(p, 0.0)
            i = min(up, key=lambda i: (_utilization(sums[i] + load, self.slaves[i].capacity_estimate),
                                       -self.slaves[i].capacity_estimate, i))
            out[p] = i
            sums[i] += load
        return out

    def rebalance(self) -> list[ArpMessage]:
        """Redistribute peers over up slaves; returns the updated ARP replies to send."""
        up = self.up_slaves()
        peers = list(self.peer_assignments)
        if not up or not peers:
            return []
        current_ok = all(self.slaves[i].up for i in self.peer_assignments.values())
        target = dict(self.peer_assignments)
        if not current_ok or self._cost(target) > self._cost(self._best_assignment(peers)) + _EPS:
            target = self._best_assignment(peers)
        messages = []
        for peer in peers:
            idx = target[peer]
            if idx != self.peer_assignments[peer]:
                self._assign(peer, idx, self.peer_loads.get(peer, 0.0))
            slave_mac = self.slaves[idx].mac
            if self.peer_view.get(peer) != slave_mac:
                self.peer_view[peer] = slave_mac
                messages.append(
                    ArpMessage(ArpOp.REPLY, slave_mac, self.logical_ip, self._peer_mac(peer), peer)
                )
        return messages

    def update_peer_load(self, peer: IPv4Address, load: float) -> None:
        peer = ip(peer)
        if peer not in self.peer_assignments:
            raise KeyError(peer)
        self._assign(peer, self.peer_assignments[peer], max(0.0, load))

    # -- transmit and receive balancing ----------------------------------

    def select_tx_slave(self, frame: Frame | None = None) -> int:
        up = self.up_slaves()
        if not up:
            raise BondError("all slaves are down")
        return min(up, key=lambda i: (self.slaves[i].tx_utilization, i))

    def transmit(self, frame: Frame) -> int:
        """Pick a slave for ``frame`` and charge its bits to that slave."""
        idx = self.select_tx_slave(frame)
        self.slaves[idx].tx_load += frame.wire_len * 8 / 1e6
        return idx

    def allocate_receive_load(self, demand: float) -> list[float]:
        """Split a downlink demand over up slaves, widest bandwidth first."""
        shares = [0.0] * len(self.slaves)
        remaining = max(0.0, demand)
        for i in sorted(self.up_slaves(), key=lambda i: (-self.slaves[i].capacity_estimate, i)):
            take = min(remaining, self.slaves[i].capacity_estimate)
            shares[i] = take
            remaining -= take
        return shares
