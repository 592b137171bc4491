"""Packet framing: 0xAA preamble, 32-bit payload, CRC-8 trailer.

All fields are sent MSB-first. The CRC variant is CRC-8/ATM
(poly 0x07, init 0x00, no reflection, no final XOR).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

PREAMBLE = 0xAA
PREAMBLE_BITS: tuple[int, ...] = (1, 0, 1, 0, 1, 0, 1, 0)
PAYLOAD_BITS = 32
CRC_BITS = 8
FRAME_BITS = len(PREAMBLE_BITS) + PAYLOAD_BITS + CRC_BITS  # 48

CRC8_POLY = 0x07
CRC8_INIT = 0x00


def _make_table(poly: int) -> tuple[int, ...]:
    table = []
    for byte in range(256):
        reg = byte
        for _ in range(8):
            reg = ((reg << 1) ^ poly) & 0xFF if reg & 0x80 else (reg << 1) & 0xFF
        table.append(reg)
    return tuple(table)


_CRC8_TABLE = _make_table(CRC8_POLY)


def crc8(data: bytes | Sequence[int]) -> int:
    crc = CRC8_INIT
    for b in data:
        crc = _CRC8_TABLE[crc ^ (b & 0xFF)]
    return crc


class DecodeErrorKind(enum.Enum):
    BAD_PREAMBLE = "BadPreamble"
    CRC_MISMATCH = "CrcMismatch"
    TRUNCATED = "Truncated"


class DecodeError(Exception):
    def __init__(self, kind: DecodeErrorKind, detail: str = ""):
        super().__init__(f"{kind.value}: {detail}" if detail else kind.value)
        self.kind = kind
        self.detail = detail

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DecodeError) and other.kind is self.kind

    def __hash__(self) -> int:
        return hash(self.kind)


@dataclass(frozen=True, slots=True)
class Packet:
    payload: int

    def __post_init__(self) -> None:
        if not 0 <= self.payload <= 0xFFFFFFFF:
            raise ValueError(f"payload out of 32-bit range: {self.payload!r}")

    def to_bytes(self) -> bytes:
        return self.payload.to_bytes(4, "big")


@dataclass(frozen=True, slots=True)
class Frame:
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.bits) != FRAME_BITS:
            raise ValueError(f"frame must have {FRAME_BITS} bits, got {len(self.bits)}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("frame bits must be 0 or 1")
        if self.bits[:8] != PREAMBLE_BITS:
            raise ValueError("frame does not start with the 0xAA preamble")

    def __len__(self) -> int:
        return FRAME_BITS

    def __iter__(self):
        return iter(self.bits)


def int_to_bits(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def bits_to_int(bits: Sequence[int]) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | (int(b) & 1)
    return value


def encode_packet(p: Packet) -> Frame:
    bits = list(PREAMBLE_BITS)
    bits += int_to_bits(p.payload, PAYLOAD_BITS)
    bits += int_to_bits(crc8(p.to_bytes()), CRC_BITS)
    return Frame(tuple(bits))


def decode_frame(bits: Sequence[int]) -> Packet:
    """Validate a received 48-bit frame and return its packet.

    Raises DecodeError. The preamble is checked before the CRC, so a
    corrupted preamble is always reported as BadPreamble.
    """
    bits = [int(b) for b in bits]
    if len(bits) < FRAME_BITS:
        raise DecodeError(DecodeErrorKind.TRUNCATED, f"{len(bits)} of {FRAME_BITS} bits")
    bits = bits[:FRAME_BITS]
    if tuple(bits[:8]) != PREAMBLE_BITS:
        raise DecodeError(DecodeErrorKind.BAD_PREAMBLE, "".join(map(str, bits[:8])))
    payload = bits_to_int(bits[8:40])
    received = bits_to_int(bits[40:48])
    expected = crc8(payload.to_bytes(4, "big"))
    if received != expected:
        raise DecodeError(
            DecodeErrorKind.CRC_MISMATCH, f"got 0x{received:02X}, want 0x{expected:02X}"
        )
    return Packet(payload)


def segment_message(data: bytes) -> list[Packet]:
    """Split a message into 4-byte packets, zero-padding the last one.

    The original length is not carried on air; use ``join_packets`` with
    the length known out of band to strip the padding.
    """
    packets = []
    for i in range(0, len(data), 4):
        chunk = bytes(data[i : i + 4]).ljust(4, b"\x00")
        packets.append(Packet(int.from_bytes(chunk, "big")))
    return packets


def join_packets(packets: Sequence[Packet], length: int) -> bytes:
    return b"".join(p.to_bytes() for p in packets)[:length]
