import random
import struct
from ipaddress import IPv4Address

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bigint_checksum, modular_checksum, oracle_checksum
from vlcwifi.checksum import (
    PROTO_TCP,
    PROTO_UDP,
    internet_checksum,
    ipv4_checksum,
    ones_complement_sum,
    pseudo_header,
    transport_checksum,
)


class TestOracle:
    def test_rfc1071_worked_example(self):
        # words 0001 f203 f4f5 f6f7 sum to 0xddf2 after folding
        data = bytes.fromhex("0001f203f4f5f6f7")
        assert ones_complement_sum(data) == 0xDDF2
        assert oracle_checksum(data) == 0x220D

    @given(st.binary(max_size=600))
    def test_two_oracles_agree(self, data):
        assert oracle_checksum(data) == modular_checksum(data) == bigint_checksum(data)

    def test_known_ipv4_header(self):
        header = bytes.fromhex("450000730000400040110000c0a80001c0a800c7")
        assert ipv4_checksum(header) == 0xB861
        assert oracle_checksum(header) == 0xB861


class TestInternetChecksum:
    def test_empty(self):
        assert internet_checksum(b"") == 0xFFFF

    def test_all_zero_words(self):
        assert internet_checksum(bytes(20)) == 0xFFFF

    def test_all_ones_sum_to_negative_zero(self):
        assert ones_complement_sum(b"\xff\xff\xff\xff") == 0xFFFF
        assert internet_checksum(b"\xff\xff") == 0x0000

    def test_odd_length_padded_with_zero(self):
        assert internet_checksum(b"\x12\x34\x56") == internet_checksum(b"\x12\x34\x56\x00")

    def test_stored_checksum_verifies(self):
        header = bytearray.fromhex("450000730000400040110000c0a80001c0a800c7")
        header[10:12] = struct.pack("!H", ipv4_checksum(bytes(header)))
        assert ones_complement_sum(bytes(header)) == 0xFFFF

    def test_header_summing_to_ffff_gives_zero(self):
        header = b"\xff\xff" + bytes(18)
        assert ipv4_checksum(header) == 0x0000

    def test_random_headers_match_oracle(self):
        rng = random.Random(20)
        for _ in range(10_000):
            header = rng.randbytes(20)
            assert ipv4_checksum(header) == oracle_checksum(header)

    def test_odd_ipv4_header_rejected(self):
        with pytest.raises(ValueError, match="even"):
            ipv4_checksum(bytes(19))

    @given(st.binary(max_size=2000))
    @settings(max_examples=500)
    def test_matches_oracle(self, data):
        assert internet_checksum(data) == oracle_checksum(data)

    def test_matches_oracle_ten_thousand(self):
        rng = random.Random(1071)
        for _ in range(10_000):
            data = rng.randbytes(rng.randrange(0, 200))
            assert internet_checksum(data) == oracle_checksum(data)

    @given(st.binary(min_size=2, max_size=200).filter(lambda b: len(b) % 2 == 0))
    def test_word_order_does_not_matter(self, data):
        words = [data[i:i + 2] for i in range(0, len(data), 2)]
        assert ones_complement_sum(b"".join(reversed(words))) == ones_complement_sum(data)


class TestPseudoHeader:
    def test_layout(self):
        ph = pseudo_header(IPv4Address("10.0.0.1"), IPv4Address("10.0.0.2"), PROTO_TCP, 40)
        assert ph == bytes([10, 0, 0, 1, 10, 0, 0, 2, 0, 6, 0, 40])

    def test_empty_udp_zero_addresses(self):
        zero = IPv4Address("0.0.0.0")
        expected = oracle_checksum(bytes(8) + bytes([0, PROTO_UDP, 0, 0]))
        assert transport_checksum(zero, zero, PROTO_UDP, b"") == expected == 0xFFFF - PROTO_UDP

    @given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1), st.binary(max_size=300))
    def test_random_segment_matches_oracle(self, s, d, seg):
        src, dst = IPv4Address(s), IPv4Address(d)
        expected = oracle_checksum(src.packed + dst.packed + bytes([0, PROTO_TCP]) + len(seg).to_bytes(2, "big") + seg)
        assert transport_checksum(src, dst, PROTO_TCP, seg) == expected

    def test_address_change_changes_checksum(self):
        seg = bytes(20)
        a = transport_checksum(IPv4Address("192.168.1.100"), IPv4Address("10.0.0.10"), PROTO_TCP, seg)
        b = transport_checksum(IPv4Address("192.168.2.100"), IPv4Address("10.0.0.10"), PROTO_TCP, seg)
        assert a != b

    def test_protocol_enters_checksum(self):
        src, dst = IPv4Address("1.2.3.4"), IPv4Address("5.6.7.8")
        assert transport_checksum(src, dst, PROTO_TCP, bytes(8)) != transport_checksum(src, dst, PROTO_UDP, bytes(8))
