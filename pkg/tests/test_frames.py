import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gen import frames, random_frame
from oracles import oracle_frame_valid, oracle_tcp_frame
from vlcwifi.frames import (
    BROADCAST_MAC,
    ETHERTYPE_ARP,
    ETHERTYPE_IPV4,
    ArpMessage,
    ArpOp,
    Frame,
    FrameError,
    Ipv4Packet,
    MacAddr,
    TcpFlags,
    TcpSegment,
    TruncatedFrameError,
    UdpDatagram,
    arp_frame,
    dump_hex_lines,
    ip,
    load_hex_lines,
    mac,
    parse_frame,
    recompute_checksums,
    rewrite,
    serialize_frame,
    tcp_frame,
    udp_frame,
    verify_checksums,
)

A = "02:00:00:00:00:0a"
B = "02:00:00:00:00:0b"


def synack_frame():
    return tcp_frame(A, B, "10.0.0.10", "192.168.1.100", 5001, 40000, TcpFlags.SYN | TcpFlags.ACK, b"", seq=7, ack=9)


class TestMacAddr:
    def test_parse_and_str(self):
        m = mac("AB:ab:0:1:2:3")
        assert str(m) == "ab:ab:00:01:02:03"
        assert mac("ab-ab-00-01-02-03") == m

    def test_bad_mac(self):
        with pytest.raises(ValueError):
            mac("01:02:03")
        with pytest.raises(ValueError):
            MacAddr(b"\x00" * 5)

    def test_broadcast(self):
        assert BROADCAST_MAC.is_broadcast
        assert not mac(A).is_broadcast


class TestParse:
    def test_minimal_ipv4_frame_is_truncated(self):
        raw = bytes(12) + b"\x08\x00"
        with pytest.raises(TruncatedFrameError):
            parse_frame(raw)

    def test_short_ethernet_header(self):
        with pytest.raises(TruncatedFrameError):
            parse_frame(bytes(13))

    def test_total_length_beyond_buffer(self):
        raw = bytearray(serialize_frame(synack_frame()))
        with pytest.raises(TruncatedFrameError):
            parse_frame(bytes(raw[:-1]))

    def test_ip_options_rejected(self):
        raw = bytearray(serialize_frame(synack_frame()))
        raw[14] = 0x46
        with pytest.raises(FrameError, match="options"):
            parse_frame(bytes(raw))

    def test_not_ipv4_version(self):
        raw = bytearray(serialize_frame(synack_frame()))
        raw[14] = 0x65
        with pytest.raises(FrameError):
            parse_frame(bytes(raw))

    def test_reply_to_client_destination(self):
        f = parse_frame(serialize_frame(synack_frame()))
        assert f.ipv4.dst == ip("192.168.1.100")
        assert isinstance(f.transport, TcpSegment)
        assert f.transport.flags == TcpFlags.SYN | TcpFlags.ACK

    def test_padding_kept_as_trailer(self):
        f = tcp_frame(A, B, "1.1.1.1", "2.2.2.2", 1, 2)
        raw = serialize_frame(f) + bytes(6)
        parsed = parse_frame(raw)
        assert parsed.trailer == bytes(6)
        assert serialize_frame(parsed) == raw

    def test_unknown_ethertype_kept_raw(self):
        raw = mac(A).octets + mac(B).octets + b"\x86\xdd" + b"xyz"
        f = parse_frame(raw)
        assert f.payload == b"xyz"
        assert serialize_frame(f) == raw
        assert verify_checksums(f)

    def test_fragment_body_opaque(self):
        pkt = Ipv4Packet("1.1.1.1", "2.2.2.2", 6, b"\x00" * 12, flags_fragment=0x2000)
        f = recompute_checksums(Frame(mac(A), mac(B), ETHERTYPE_IPV4, pkt))
        g = parse_frame(serialize_frame(f))
        assert g.ipv4.body == b"\x00" * 12
        assert g.transport is None

    def test_arp_roundtrip(self):
        msg = ArpMessage(ArpOp.REQUEST, mac(A), ip("192.168.1.1"), mac("00:00:00:00:00:00"), ip("192.168.1.200"))
        f = arp_frame(msg)
        assert f.dst_mac == BROADCAST_MAC
        assert f.ethertype == ETHERTYPE_ARP
        assert parse_frame(serialize_frame(f)) == f
        assert f.wire_len == 42

    def test_non_ethernet_arp_left_raw(self):
        body = bytearray(ArpMessage(ArpOp.REPLY, mac(A), ip("1.1.1.1"), mac(B), ip("2.2.2.2")).to_bytes())
        body[1] = 6  # hardware type 6 (IEEE 802)
        f = parse_frame(mac(A).octets + mac(B).octets + b"\x08\x06" + bytes(body))
        assert f.arp is None


class TestSerialize:
    def test_matches_hand_built_bytes(self):
        f = tcp_frame(A, B, "192.168.1.100", "10.0.0.10", 40000, 5001, TcpFlags.SYN, b"hello", seq=1000, ttl=63,
                      identification=77)
        expected = oracle_tcp_frame(A, B, "192.168.1.100", "10.0.0.10", 40000, 5001, 1000, 0, int(TcpFlags.SYN),
                                    b"hello", ttl=63, identification=77)
        assert serialize_frame(f) == expected

    def test_wrong_checksum_preserved(self):
        f = synack_frame()
        bad = replace(f, payload=replace(f.ipv4, header_checksum=0x1234))
        raw = serialize_frame(bad)
        assert raw[24:26] == b"\x12\x34"
        assert parse_frame(raw).ipv4.header_checksum == 0x1234
        assert not verify_checksums(parse_frame(raw))

    @given(frames())
    @settings(max_examples=300)
    def test_length_equals_wire_len(self, f):
        raw = serialize_frame(f)
        expected = 14 + (f.ipv4.total_length if f.ipv4 else 28 if f.arp else len(f.payload))
        assert len(raw) == f.wire_len == expected

    @given(frames())
    @settings(max_examples=300)
    def test_roundtrip_frame(self, f):
        assert parse_frame(serialize_frame(f)) == f

    @given(frames(), st.binary(max_size=20))
    @settings(max_examples=200)
    def test_roundtrip_bytes(self, f, pad):
        raw = serialize_frame(f) + pad
        assert serialize_frame(parse_frame(raw)) == raw

    @given(st.binary(min_size=14, max_size=200))
    @settings(max_examples=300)
    def test_arbitrary_bytes_either_parse_or_raise_frame_error(self, raw):
        try:
            f = parse_frame(raw)
        except (FrameError, ValueError):
            return
        assert serialize_frame(f) == raw


class TestChecksums:
    def test_fresh_frame_verifies(self):
        assert verify_checksums(synack_frame())

    def test_rewrite_without_recompute_fails(self):
        f = synack_frame()
        stale = replace(f, payload=replace(f.ipv4, dst=ip("192.168.2.100")))
        assert not verify_checksums(stale)
        assert verify_checksums(recompute_checksums(stale))

    def test_udp_zero_checksum_is_vacuous(self):
        pkt = Ipv4Packet("1.1.1.1", "2.2.2.2", 17, UdpDatagram(1, 2, 0, b"abc"))
        f = Frame(mac(A), mac(B), ETHERTYPE_IPV4, pkt)
        f = replace(f, payload=replace(pkt, header_checksum=0))
        fixed_ip = recompute_checksums(f)
        vacuous = replace(fixed_ip, payload=replace(fixed_ip.ipv4, body=UdpDatagram(1, 2, 0, b"abc")))
        assert verify_checksums(vacuous)

    def test_udp_computed_zero_sent_as_ffff(self):
        rng = random.Random(5)
        for _ in range(200_000):
            f = udp_frame(A, B, "10.0.0.1", "10.0.0.2", 1, 2, rng.randbytes(2))
            if f.transport.checksum == 0xFFFF:
                assert verify_checksums(f)
                return
        pytest.skip("no payload hit the all-zero checksum")

    @pytest.mark.parametrize("field", ["src_ip", "dst_ip", "src_port", "dst_port", "payload"])
    def test_mutation_invalidates(self, field):
        f = tcp_frame(A, B, "192.168.1.100", "10.0.0.10", 40000, 5001, payload=b"data")
        pkt, seg = f.ipv4, f.transport
        if field == "src_ip":
            pkt = replace(pkt, src=ip("192.168.1.101"))
        elif field == "dst_ip":
            pkt = replace(pkt, dst=ip("10.0.0.11"))
        elif field == "src_port":
            pkt = replace(pkt, body=replace(seg, src_port=40001))
        elif field == "dst_port":
            pkt = replace(pkt, body=replace(seg, dst_port=5002))
        else:
            pkt = replace(pkt, body=replace(seg, payload=b"dbta"))
        broken = replace(f, payload=pkt)
        assert not verify_checksums(broken)
        assert verify_checksums(recompute_checksums(broken))

    @given(frames())
    @settings(max_examples=300)
    def test_recompute_then_verify(self, f):
        g = recompute_checksums(f)
        assert verify_checksums(g)
        assert oracle_frame_valid(serialize_frame(g))

    def test_rewrite_recomputes(self):
        f = rewrite(synack_frame(), dst_ip=ip("192.168.2.100"), dst_mac=mac(B), ttl=9)
        assert f.ipv4.dst == ip("192.168.2.100")
        assert f.ipv4.ttl == 9
        assert verify_checksums(f)


class TestConstruction:
    def test_total_length_mismatch(self):
        with pytest.raises(ValueError):
            Ipv4Packet("1.1.1.1", "2.2.2.2", 6, b"abcd", total_length=30)

    def test_tcp_options_alignment(self):
        with pytest.raises(ValueError):
            TcpSegment(1, 2, options=b"\x01\x01\x01")

    def test_summary_mentions_flags(self):
        assert "[SYN|ACK]" in synack_frame().summary()


class TestHexLines:
    def test_roundtrip(self):
        rng = random.Random(3)
        fs = [random_frame(rng) for _ in range(20)]
        assert load_hex_lines(dump_hex_lines(fs)) == fs

    def test_comments_and_blank_lines(self):
        f = synack_frame()
        text = "# capture\n\n" + dump_hex_lines([f]).strip() + "  # synack\n"
        assert load_hex_lines(text) == [f]

    def test_error_names_line(self):
        with pytest.raises(FrameError, match="line 2"):
            load_hex_lines(dump_hex_lines([synack_frame()]) + "zz\n")
