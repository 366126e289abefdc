"""Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL`` line with the measured
values and its wall time, then asserts. Run ``python tests/test_acceptance.py``
to get just the summary lines.
"""

import hashlib
import math
import random
import statistics
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bondkit import (  # noqa: E402
    ROUTER_IP,
    apply,
    make_bond,
    nic,
    peer_reply,
    random_capacities,
    random_ops,
    reply_to,
    request_for,
)
from gen import random_frame  # noqa: E402
from oracles import bigint_checksum  # noqa: E402
from vlcwifi.channels import VlcChannel, vlc_throughput  # noqa: E402
from vlcwifi.checksum import internet_checksum, ipv4_checksum, transport_checksum  # noqa: E402
from vlcwifi.engine import run_scenario, trace_handshake  # noqa: E402
from vlcwifi.experiments import ExperimentSpec, crossover, measure, run_experiment  # noqa: E402
from vlcwifi.frames import ip, mac, parse_frame, serialize_frame, verify_checksums  # noqa: E402
from vlcwifi.netif import InterfaceIdentity  # noqa: E402
from vlcwifi.relay import RelayConfig, relay_step  # noqa: E402
from vlcwifi.scenario import ScenarioConfig, build_flows, build_topology  # noqa: E402
from vlcwifi.spoof import SpoofConfig, uplink_rewrite  # noqa: E402
from vlcwifi.topology import Mode  # noqa: E402

SEEDS = 10
CRITERIA = {}


def criterion(number: int, budget_s: float):
    def register(fn):
        CRITERIA[number] = (fn, budget_s)
        return fn
    return register


def evaluate(number: int) -> tuple[bool, str]:
    fn, budget = CRITERIA[number]
    t0 = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - t0
    passed = ok and elapsed < budget
    verdict = "PASS" if passed else "FAIL"
    line = f"criterion {number}: {verdict} ({elapsed:.2f} s of {budget:g} s) {detail}"
    return passed, line


def close(value: float, target: float, rel: float) -> bool:
    return abs(value - target) <= rel * target


# -- calibration -----------------------------------------------------------


@criterion(1, 1.0)
def calibration():
    wifi = statistics.fmean(measure(ScenarioConfig(seed=s), "bulk") for s in range(SEEDS))
    v2, v5 = vlc_throughput(VlcChannel(2.0)), vlc_throughput(VlcChannel(5.0))
    ok = close(wifi, 30, 0.05) and v2 == 74.0 and v5 == 25.0
    return ok, f"wifi_only n=1 {wifi:.2f} Mbps, vlc(2 m)={v2:g}, vlc(5 m)={v5:g}"


@criterion(2, 10.0)
def contenders():
    table = run_experiment(ExperimentSpec("contenders", sweep=(1, 6, 1), seeds=SEEDS))
    wifi, hybrid, agg = (table.means(m) for m in ("wifi_only", "hybrid", "aggregated"))
    flat = all(close(h, 70, 0.05) for h in hybrid)
    ratio = hybrid[-1] / wifi[-1]
    summed = all(close(a, w + h, 0.10) for w, h, a in zip(wifi, hybrid, agg))
    worst = max(abs(a - (w + h)) / (w + h) for w, h, a in zip(wifi, hybrid, agg))
    detail = (f"hybrid {min(hybrid):.1f}..{max(hybrid):.1f} Mbps, ratio at n=6 {ratio:.2f}, "
              f"aggregated off the sum by at most {100 * worst:.1f}%")
    return flat and ratio >= 4.5 and summed, detail


@criterion(3, 10.0)
def distance():
    table = run_experiment(ExperimentSpec("distance", modes=("wifi_only", "hybrid"), sweep=(2, 5, 0.1), seeds=SEEDS))
    x = crossover(table)
    return x is not None and 3.8 <= x <= 4.4, f"crossover at {x:.2f} m" if x is not None else "no crossover"


@criterion(4, 10.0)
def blocking():
    table = run_experiment(ExperimentSpec("blocking", sweep=(0, 30, 5), seeds=SEEDS))
    baseline = statistics.fmean(measure(ScenarioConfig(seed=s), "bulk") for s in range(SEEDS))
    hybrid30 = table.value("hybrid", 30).mean
    agg_ok = all(table.value("aggregated", x).mean >= table.value("wifi_only", x).mean for x in table.xs())
    margin = min(table.value("aggregated", x).mean - table.value("wifi_only", x).mean for x in table.xs())
    detail = (f"hybrid at 30 s/min {hybrid30:.2f} vs wifi baseline {baseline:.2f} Mbps, "
              f"aggregated minus wifi_only at least {margin:.1f} Mbps")
    return hybrid30 > baseline and agg_ok, detail


@criterion(5, 10.0)
def load_time():
    spec = ExperimentSpec("load_time", seeds=SEEDS)
    samples = {m.value: [measure(spec.scenario(m, 10, s), "load_time") for s in range(SEEDS)] for m in spec.modes}
    means = {m: statistics.fmean(v) for m, v in samples.items()}
    ordered = means["hybrid"] <= means["aggregated"] <= means["wifi_only"]
    band = all(0 <= t <= 5 for m in ("hybrid", "aggregated") for t in samples[m])
    detail = ", ".join(f"{m} {means[m]:.3f} s" for m in ("hybrid", "aggregated", "wifi_only"))
    return ordered and band, detail


# -- frames ----------------------------------------------------------------

B1 = InterfaceIdentity("B-1", mac("02:00:00:00:0b:01"), ip("192.168.1.100"), device="wlan0")
B2 = InterfaceIdentity("B-2", mac("02:00:00:00:0b:02"), ip("192.168.2.100"), device="eth0")
A1 = InterfaceIdentity("A-1", mac("02:00:00:00:0a:01"), ip("192.168.1.200"))
A2 = InterfaceIdentity("A-2", mac("02:00:00:00:0a:02"), ip("192.168.2.200"))
RELAY_CFG = RelayConfig(A1, A2, B1.ip, B2.mac, B2.ip)
SPOOF_CFG = SpoofConfig(B2, B1, mac("02:00:00:00:01:01"))


def checksums_match_oracle(raw: bytes) -> bool:
    if raw[12:14] != b"\x08\x00":
        return True
    header = bytearray(raw[14:34])
    stored = int.from_bytes(header[10:12], "big")
    header[10:12] = b"\x00\x00"
    if ipv4_checksum(bytes(header)) != bigint_checksum(bytes(header)) or stored != bigint_checksum(bytes(header)):
        return False
    proto = header[9]
    if proto not in (6, 17) or int.from_bytes(header[6:8], "big") & 0x3FFF:
        return True
    total = int.from_bytes(header[2:4], "big")
    seg = bytearray(raw[34:14 + total])
    at = 16 if proto == 6 else 6
    stored = int.from_bytes(seg[at:at + 2], "big")
    if proto == 17 and stored == 0:
        return True
    seg[at:at + 2] = b"\x00\x00"
    src, dst = ip(bytes(header[12:16])), ip(bytes(header[16:20]))
    pseudo = bytes(header[12:20]) + bytes([0, proto]) + len(seg).to_bytes(2, "big")
    expected = bigint_checksum(pseudo + bytes(seg))
    if transport_checksum(src, dst, proto, bytes(seg)) != expected:
        return False
    if proto == 17 and expected == 0:
        expected = 0xFFFF
    return stored == expected


@criterion(6, 5.0)
def oracle_equivalence():
    rng = random.Random(20260101)
    bad = {"checksum": 0, "roundtrip": 0, "relay": 0, "spoof": 0}
    relayed = spoofed = 0
    for i in range(10_000):
        roll = i % 4
        f = random_frame(rng, dst_ip=B1.ip if roll == 1 else None, src_ip=B2.ip if roll == 2 else None)
        raw = serialize_frame(f)
        blob = raw[: rng.randrange(len(raw) + 1)]
        if not checksums_match_oracle(raw) or internet_checksum(blob) != bigint_checksum(blob):
            bad["checksum"] += 1
        if parse_frame(raw) != f or serialize_frame(parse_frame(raw)) != raw:
            bad["roundtrip"] += 1
        out = relay_step(f, RELAY_CFG)
        if out is not None:
            relayed += 1
            bad["relay"] += not (verify_checksums(out) and checksums_match_oracle(serialize_frame(out)))
        if f.ipv4 is not None and f.transport is not None:
            up = uplink_rewrite(f, SPOOF_CFG)
            if up is not None:
                spoofed += 1
                bad["spoof"] += not (verify_checksums(up) and checksums_match_oracle(serialize_frame(up)))
    failures = sum(bad.values())
    detail = f"10000 frames, {relayed} relayed, {spoofed} spoofed, mismatches {bad}"
    return failures == 0 and relayed > 0 and spoofed > 0, detail


# -- end to end ------------------------------------------------------------


@criterion(7, 1.0)
def tuple_invariant():
    cfg = ScenarioConfig(mode=Mode.HYBRID)
    result = run_scenario(build_topology(cfg), build_flows(cfg), cfg.seed)
    flow = result.flow("client")
    report = trace_handshake(result, "client")
    bound_to_vlc = flow.app_tuple is not None and flow.app_tuple[0] == str(B2.ip)
    paths = (report.uplink_capture == "B-2" and report.uplink == ["B-1", "LAN", "WAN"]
             and report.downlink == ["LAN", "A-1", "A-2", "B-2"])
    ok = bound_to_vlc and paths and flow.socket_mismatches == 0 and flow.frames_delivered > 0
    detail = f"socket {flow.app_tuple}, " + report.describe().strip().replace("\n", "; ")
    return ok, detail


# -- bond ------------------------------------------------------------------

CASES = 1000


@criterion(8, 5.0)
def bond_properties():
    rng = random.Random(8)
    failures = {"totality": 0, "conservation": 0, "argmax": 0, "failover": 0}
    for _ in range(CASES):
        caps, ops = random_capacities(rng), random_ops(rng)
        b = make_bond(*caps)
        emitted = []
        for op in ops:
            apply(b, op, emitted)
        total = (set(b.saved_peer_info) <= set(b.peer_assignments)
                 and all(0 <= i < len(b.slaves) and b.slaves[i].up for i in b.peer_assignments.values()))
        failures["totality"] += not total

        before = b.total_assigned()
        b.rebalance()
        failures["conservation"] += not math.isclose(b.total_assigned(), before, rel_tol=1e-9, abs_tol=1e-9)

        scale, via_reply = rng.uniform(1e-3, 1e3), rng.random() < 0.5
        picks = []
        for factor in (1.0, scale):
            s = make_bond(*(c * factor for c in caps))
            if via_reply:
                s.record_arp_request(request_for(ROUTER_IP))
                picks.append(s.on_peer_arp_reply(peer_reply(ROUTER_IP)).sender_mac)
            else:
                picks.append(s.intercept_arp_response(reply_to(ROUTER_IP)).sender_mac)
        widest = max(range(len(caps)), key=lambda i: (caps[i], -i))
        failures["argmax"] += not (picks[0] == picks[1] == nic(widest + 1).mac)

        fcaps = caps if len(caps) > 1 else caps + [10.0]
        f = make_bond(*fcaps)
        for op in ops:
            apply(f, op, [])
        victim = rng.randrange(len(fcaps))
        for i in range(len(fcaps)):
            f.set_slave_up(i, i != victim)
        f.rebalance()
        failures["failover"] += not (victim not in f.peer_assignments.values()
                                     and abs(f.slaves[victim].assigned_rx_load) < 1e-9)
    return not any(failures.values()), f"{CASES} random sequences per property, failures {failures}"


# -- determinism -----------------------------------------------------------


@criterion(9, 10.0)
def determinism():
    specs = [
        ExperimentSpec("contenders", seeds=SEEDS),
        ExperimentSpec("distance", sweep=(3, 5, 0.25), seeds=SEEDS),
        ExperimentSpec("blocking", seeds=SEEDS),
        ExperimentSpec("load_time", seeds=SEEDS),
        ExperimentSpec("vlc_curve"),
    ]
    digests = []
    for spec in specs:
        a = hashlib.sha256(run_experiment(spec).to_csv().encode()).hexdigest()
        b = hashlib.sha256(run_experiment(spec).to_csv().encode()).hexdigest()
        digests.append((spec.experiment, a == b, a[:12]))
    same = all(eq for _, eq, _ in digests)
    return same, ", ".join(f"{name} {h}" + ("" if eq else " DIFFERS") for name, eq, h in digests)


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    passed, line = evaluate(number)
    with capsys.disabled():
        print("\n" + line)
    assert passed, line


if __name__ == "__main__":
    results = [evaluate(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(p for p, _ in results) else 1)
