"""Simulator for hybrid VLC/WiFi access: frame relay, OS spoofing and ALB bonding."""

__version__ = "0.1.0"
