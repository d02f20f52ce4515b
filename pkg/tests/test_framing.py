import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from powermodem.errors import BadPreamble, CrcMismatch, InvalidLength, InvalidPayloadLength
from powermodem.framing import (
    FRAME_BITS,
    bits_to_bytes,
    bits_to_int,
    bytes_to_bits,
    crc8,
    decode_frame,
    encode_frame,
    int_to_bits,
    packetize,
    serialize,
)

payloads = st.lists(st.integers(0, 1), min_size=32, max_size=32)


def long_division_crc(bits):
    """Bit-serial GF(2) division by x^8 + x^2 + x + 1, independent of the table path."""
    generator = [1, 0, 0, 0, 0, 0, 1, 1, 1]
    work = list(bits) + [0] * 8
    for i in range(len(bits)):
        if work[i]:
            for j, g in enumerate(generator):
                work[i + j] ^= g
    return work[-8:]


def test_crc_of_zero_payload_is_zero():
    assert bits_to_int(crc8([0] * 32)) == 0


def test_crc_of_one_matches_long_division():
    # frozen from long_division_crc: x^8 mod g(x) = x^2 + x + 1
    assert bits_to_int(crc8(int_to_bits(1, 32))) == 0x07
    assert list(crc8(int_to_bits(1, 32))) == long_division_crc(int_to_bits(1, 32))


def test_crc_deadbeef_frozen():
    assert bits_to_int(crc8(int_to_bits(0xDEADBEEF, 32))) == 0xCA


@given(payloads)
def test_crc_agrees_with_long_division(p):
    assert list(crc8(p)) == long_division_crc(p)


@given(payloads, st.integers(0, 31))
def test_single_flip_changes_crc(p, i):
    q = list(p)
    q[i] ^= 1
    assert not np.array_equal(crc8(p), crc8(q))


@pytest.mark.parametrize("n", [0, 31, 33, 44])
def test_crc_rejects_wrong_length(n):
    with pytest.raises(InvalidPayloadLength):
        crc8([0] * n)


@given(payloads)
def test_frame_layout(p):
    frame = encode_frame(p)
    bits = frame.bits
    assert bits.size == FRAME_BITS == 44
    assert list(bits[:4]) == [1, 0, 1, 0]
    assert list(bits[4:36]) == list(p)
    assert np.array_equal(bits[36:], crc8(p))


@given(payloads)
def test_round_trip(p):
    assert list(decode_frame(encode_frame(p).bits)) == list(p)


def test_frame_hex_is_eleven_digits():
    frame = encode_frame(int_to_bits(0xDEADBEEF, 32))
    assert frame.hex() == "adeadbeefca"


def test_payload_flip_is_crc_mismatch(rng):
    bits = encode_frame(rng.integers(0, 2, 32)).bits
    bits[10] ^= 1
    with pytest.raises(CrcMismatch):
        decode_frame(bits)


def test_preamble_flip_is_bad_preamble(rng):
    bits = encode_frame(rng.integers(0, 2, 32)).bits
    bits[0] ^= 1
    with pytest.raises(BadPreamble):
        decode_frame(bits)


def test_decode_wrong_length():
    with pytest.raises(InvalidLength):
        decode_frame([1, 0, 1, 0])


def test_encode_wrong_length():
    with pytest.raises(InvalidPayloadLength):
        encode_frame([1] * 16)


def test_all_single_and_double_corruptions_rejected():
    bits = encode_frame(int_to_bits(0x5A3C96E1, 32)).bits
    positions = range(FRAME_BITS)
    cases = [(i,) for i in positions] + list(itertools.combinations(positions, 2))
    assert len(cases) == 44 + 946
    for flips in cases:
        corrupted = bits.copy()
        corrupted[list(flips)] ^= 1
        with pytest.raises((BadPreamble, CrcMismatch)):
            decode_frame(corrupted)


def test_packetize_exact():
    frames = packetize(bytes(range(8)))
    assert len(frames) == 2
    assert bits_to_bytes(frames[1].payload) == bytes([4, 5, 6, 7])


def test_packetize_pads_last_chunk():
    frames = packetize(b"abcde")
    assert len(frames) == 2
    assert list(frames[1].payload[8:]) == [0] * 24
    assert bits_to_bytes(frames[1].payload[:8]) == b"e"


def test_packetize_empty():
    assert packetize(b"") == []
    assert serialize([]).size == 0


def test_byte_bit_helpers_msb_first():
    assert list(bytes_to_bits(b"\x80")) == [1, 0, 0, 0, 0, 0, 0, 0]
    assert bits_to_bytes([0, 0, 0, 0, 0, 0, 0, 1]) == b"\x01"
