"""Bit framing: 4-bit preamble, 32-bit payload, CRC-8 trailer.

Bits are held as ``numpy.uint8`` arrays of zeros and ones, MSB-first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadPreamble, CrcMismatch, InvalidLength, InvalidPayloadLength, ModemError

PREAMBLE = np.array([1, 0, 1, 0], dtype=np.uint8)
PAYLOAD_BITS = 32
CRC_BITS = 8
FRAME_BITS = len(PREAMBLE) + PAYLOAD_BITS + CRC_BITS  # 44

CRC8_POLY = 0x07


def as_bits(bits) -> np.ndarray:
    """Coerce an iterable or a '0101' string to a validated uint8 bit array."""
    if isinstance(bits, str):
        bits = [int(c) for c in bits if not c.isspace()]
    arr = np.asarray(bits)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ModemError("bit streams may only contain 0 and 1")
    return arr.astype(np.uint8)


def bits_to_int(bits) -> int:
    value = 0
    for b in as_bits(bits):
        value = (value << 1) | int(b)
    return value


def int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))


def bits_to_bytes(bits) -> bytes:
    return np.packbits(as_bits(bits)).tobytes()


def _crc8_table(poly: int) -> list[int]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        table.append(crc)
    return table


_CRC8_TABLE = _crc8_table(CRC8_POLY)


def crc8(payload) -> np.ndarray:
    """CRC-8 (poly 0x07, init 0x00, MSB-first, no reflection or final XOR) of a 32-bit payload."""
    payload = as_bits(payload)
    if payload.size != PAYLOAD_BITS:
        raise InvalidPayloadLength(f"payload must be {PAYLOAD_BITS} bits, got {payload.size}")
    crc = 0
    for byte in np.packbits(payload):
        crc = _CRC8_TABLE[crc ^ int(byte)]
    return int_to_bits(crc, CRC_BITS)


@dataclass(frozen=True)
class Frame:
    preamble: np.ndarray
    payload: np.ndarray
    crc: np.ndarray

    @property
    def bits(self) -> np.ndarray:
        return np.concatenate([self.preamble, self.payload, self.crc])

    def hex(self) -> str:
        # 44 bits is exactly 11 nibbles
        return f"{bits_to_int(self.bits):011x}"

    def __len__(self) -> int:
        return FRAME_BITS


def encode_frame(payload) -> Frame:
    payload = as_bits(payload)
    if payload.size != PAYLOAD_BITS:
        raise InvalidPayloadLength(f"payload must be {PAYLOAD_BITS} bits, got {payload.size}")
    return Frame(PREAMBLE.copy(), payload.copy(), crc8(payload))


def decode_frame(bits) -> np.ndarray:
    """Validate a serialized 44-bit frame and return its payload.

    Raises:
        InvalidLength: ``bits`` is not 44 long.
        BadPreamble: the first four bits are not 1010.
        CrcMismatch: the trailer does not match the recomputed CRC; the
            frame was corrupted in transit and should be discarded.
    """
    bits = as_bits(bits)
    if bits.size != FRAME_BITS:
        raise InvalidLength(f"frame must be {FRAME_BITS} bits, got {bits.size}")
    if not np.array_equal(bits[:4], PREAMBLE):
        raise BadPreamble("preamble is not 1010")
    payload = bits[4:4 + PAYLOAD_BITS]
    if not np.array_equal(crc8(payload), bits[4 + PAYLOAD_BITS:]):
        raise CrcMismatch("received CRC does not match payload")
    return payload.copy()


def packetize(data: bytes) -> list[Frame]:
    """Split bytes into 4-byte payloads, zero-padding the last one.

    The frame carries no length field, so the original byte count has to be
    conveyed some other way.
    """
    data = bytes(data)
    if len(data) % 4:
        data = data + b"\x00" * (4 - len(data) % 4)
    return [encode_frame(bytes_to_bits(data[i:i + 4])) for i in range(0, len(data), 4)]


def serialize(frames) -> np.ndarray:
    frames = list(frames)
    if not frames:
        return np.zeros(0, dtype=np.uint8)
    return np.concatenate([f.bits for f in frames])
