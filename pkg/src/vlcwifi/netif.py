"""Network interface identities shared by hosts, relay, spoofing and bonding."""

from __future__ import annotations

from dataclasses import dataclass
from ipaddress import IPv4Address, IPv4Network

from .frames import MacAddr, ip, mac


@dataclass(frozen=True)
class InterfaceIdentity:
    """A NIC role such as "A-1", with its addresses and OS device name."""

    name: str
    mac: MacAddr
    ip: IPv4Address
    subnet_mask: IPv4Address = IPv4Address("255.255.255.0")
    device: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "mac", mac(self.mac))
        object.__setattr__(self, "ip", ip(self.ip))
        object.__setattr__(self, "subnet_mask", ip(self.subnet_mask))
        if not self.device:
            object.__setattr__(self, "device", self.name)
        # raises on a non-contiguous mask
        self.network

    @property
    def network(self) -> IPv4Network:
        return IPv4Network(f"{self.ip}/{self.subnet_mask}", strict=False)

    def in_subnet(self, addr: IPv4Address) -> bool:
        return ip(addr) in self.network

    @classmethod
    def from_dict(cls, name: str, d: dict) -> "InterfaceIdentity":
        return cls(
            name=name,
            mac=mac(d["mac"]),
            ip=ip(d["ip"]),
            subnet_mask=ip(d.get("mask", "255.255.255.0")),
            device=d.get("device", ""),
        )
