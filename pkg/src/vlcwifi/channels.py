"""Capacity and latency models for the shared WiFi cell and the VLC link.

Both are table driven so that measured operating points can be pinned
exactly. Rates are in Mbps, latencies in milliseconds, distances in metres.

WiFi: an n-station saturated cell delivers ``nominal * efficiency(n)`` in
total, shared evenly. Distance does not enter; indoor ranges are short.

VLC: piecewise-linear in vertical distance over the anchor table, faded
linearly to zero at the edge of the light cone horizontally.
"""

from __future__ import annotations

import bisect
import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

# single station: 30 Mbps TCP at the 54 Mbps setting; six stations: 14 Mbps
# each (hybrid 70 Mbps is five times that)
DEFAULT_EFFICIENCY = ((1, 30.0 / 54.0), (6, 6 * 14.0 / 54.0))

# (vertical m, Mbps): 74 at 2 m and 25 at 5 m measured on the bare link; the
# 4.1 m point is where the relayed downlink falls to the single-user WiFi rate
HYBRID_PATH_EFFICIENCY = 70.0 / 74.0
DEFAULT_VLC_ANCHORS = ((2.0, 74.0), (4.1, 30.0 / HYBRID_PATH_EFFICIENCY), (5.0, 25.0))
DEFAULT_COVERAGE = ((2.0, 1.5), (5.0, 1.5))


class ChannelError(ValueError):
    pass


def interpolate(points: Sequence[tuple[float, float]], x: float, extrapolate: bool = False) -> float:
    """Piecewise-linear lookup; clamps outside the table unless ``extrapolate``.

    With ``extrapolate`` only the upper end continues along the last segment.
    """
    xs = [p[0] for p in points]
    if len(points) == 1 or x <= xs[0]:
        return points[0][1]
    if x >= xs[-1]:
        if not extrapolate:
            return points[-1][1]
        (x0, y0), (x1, y1) = points[-2], points[-1]
        return y1 + (y1 - y0) / (x1 - x0) * (x - x1)
    i = bisect.bisect_right(xs, x)
    (x0, y0), (x1, y1) = points[i - 1], points[i]
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0)


def _check_table(name: str, points: Sequence[tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    pts = tuple((float(x), float(y)) for x, y in points)
    if not pts:
        raise ChannelError(f"{name}: empty table")
    if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
        raise ChannelError(f"{name}: x values must be strictly increasing")
    return pts


@dataclass(frozen=True)
class WifiChannel:
    nominal_rate: float = 54.0
    n_contenders: int = 1
    efficiency_curve: tuple[tuple[float, float], ...] = DEFAULT_EFFICIENCY
    base_latency: float = 2.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "efficiency_curve", _check_table("efficiency_curve", self.efficiency_curve))
        if any(e <= 0 for _, e in self.efficiency_curve):
            raise ChannelError("efficiency_curve: values must be positive")
        if self.nominal_rate <= 0:
            raise ChannelError("nominal_rate must be positive")

    def efficiency(self, n: int) -> float:
        return interpolate(self.efficiency_curve, n)


def wifi_per_user_throughput(ch: WifiChannel, n: int | None = None) -> float:
    n = ch.n_contenders if n is None else n
    if n < 1:
        raise ChannelError(f"need at least one station, got {n}")
    return ch.nominal_rate * ch.efficiency(n) / n


def wifi_latency(ch: WifiChannel, n: int | None = None) -> float:
    """Mean one-way access latency: each saturated station waits one turn per peer."""
    n = ch.n_contenders if n is None else n
    if n < 1:
        raise ChannelError(f"need at least one station, got {n}")
    return ch.base_latency * n


@dataclass(frozen=True)
class VlcChannel:
    vertical_m: float = 2.0
    horizontal_m: float = 0.0
    rate_anchors: tuple[tuple[float, float], ...] = DEFAULT_VLC_ANCHORS
    coverage_limit: tuple[tuple[float, float], ...] = DEFAULT_COVERAGE
    one_way_latency: float = 10.0

    def __post_init__(self) -> None:
        anchors = _check_table("rate_anchors", self.rate_anchors)
        if any(b[1] > a[1] for a, b in zip(anchors, anchors[1:])):
            raise ChannelError("rate_anchors: rate must not increase with distance")
        cover = _check_table("coverage_limit", self.coverage_limit)
        if any(b[1] > a[1] for a, b in zip(cover, cover[1:])):
            raise ChannelError("coverage_limit: radius must not grow with distance")
        object.__setattr__(self, "rate_anchors", anchors)
        object.__setattr__(self, "coverage_limit", cover)
        if self.vertical_m < 0 or self.horizontal_m < 0:
            raise ChannelError("distances must be non-negative")

    def at(self, vertical_m: float, horizontal_m: float | None = None) -> "VlcChannel":
        return VlcChannel(
            vertical_m,
            self.horizontal_m if horizontal_m is None else horizontal_m,
            self.rate_anchors,
            self.coverage_limit,
            self.one_way_latency,
        )


def vlc_throughput(ch: VlcChannel) -> float:
    on_axis = max(0.0, interpolate(ch.rate_anchors, ch.vertical_m, extrapolate=True))
    radius = interpolate(ch.coverage_limit, ch.vertical_m)
    if ch.horizontal_m >= radius:
        return 0.0
    return on_axis * (1.0 - ch.horizontal_m / radius)


class BlockingPattern(str, Enum):
    CONTIGUOUS = "contiguous"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class BlockingSchedule:
    """Line-of-sight obstruction repeating every minute.

    ``contiguous`` blocks one stretch per minute starting at ``offset_s``;
    ``periodic`` spreads the same duty cycle over ``period_s`` sub-periods.
    """

    blocked_seconds_per_minute: float = 0.0
    pattern: BlockingPattern = BlockingPattern.CONTIGUOUS
    offset_s: float = 0.0
    period_s: float = 10.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "pattern", BlockingPattern(self.pattern))
        if not 0.0 <= self.blocked_seconds_per_minute <= 60.0:
            raise ChannelError("blocked_seconds_per_minute must lie in [0, 60]")
        if self.period_s <= 0 or 60.0 % self.period_s > 1e-9:
            raise ChannelError("period_s must divide 60")

    @property
    def duty(self) -> float:
        return self.blocked_seconds_per_minute / 60.0

    def intervals(self, t0: float, t1: float) -> list[tuple[float, float]]:
        """Blocked intervals clipped to [t0, t1], in time order."""
        if self.duty <= 0 or t1 <= t0:
            return []
        if self.pattern is BlockingPattern.CONTIGUOUS:
            period, length = 60.0, self.blocked_seconds_per_minute
        else:
            period, length = self.period_s, self.period_s * self.duty
        offset = self.offset_s % period
        out = []
        k = int((t0 - offset) // period) - 1
        while True:
            start = offset + k * period
            if start >= t1:
                break
            a, b = max(start, t0), min(start + length, t1)
            if b > a:
                if out and abs(out[-1][1] - a) < 1e-12:
                    out[-1] = (out[-1][0], b)
                else:
                    out.append((a, b))
            k += 1
        return out

    def is_blocked(self, t: float) -> bool:
        return any(a <= t < b for a, b in self.intervals(t - 60.0, t + 1e-9))


def apply_blocking(base: float, sched: BlockingSchedule) -> float:
    if base < 0:
        raise ChannelError("base rate must be non-negative")
    return base * (1.0 - sched.blocked_seconds_per_minute / 60.0)


def curve_csv(points: Iterable[tuple[float, float]], header: tuple[str, str] = ("distance_m", "mbps")) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for x, y in points:
        writer.writerow([f"{x:.3f}", f"{y:.6f}"])
    return buf.getvalue()


def vlc_curve(ch: VlcChannel, distances: Iterable[float]) -> list[tuple[float, float]]:
    return [(d, vlc_throughput(ch.at(d))) for d in distances]


@dataclass(frozen=True)
class ChannelSet:
    """The channel descriptors a scenario runs over."""

    wifi: WifiChannel = field(default_factory=WifiChannel)
    vlc: VlcChannel = field(default_factory=VlcChannel)
    blocking: BlockingSchedule = field(default_factory=BlockingSchedule)
