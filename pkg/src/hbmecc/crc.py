"""CRC-16/CCITT-FALSE and the 34-byte chunk unit.

A unit is 32 payload bytes followed by the CRC of those bytes, big-endian.
"""

import binascii
from dataclasses import dataclass

import numpy as np

CHUNK_BYTES = 32
CRC_BYTES = 2
UNIT_BYTES = CHUNK_BYTES + CRC_BYTES
UNIT_BITS = UNIT_BYTES * 8  # 272

CRC_INIT = 0xFFFF


def crc16(data):
    """CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection, xorout 0)."""
    return binascii.crc_hqx(bytes(data), CRC_INIT)


@dataclass(frozen=True)
class ChunkUnit:
    data: bytes
    crc: int

    def __post_init__(self):
        if len(self.data) != CHUNK_BYTES:
            raise ValueError(f"unit payload must be {CHUNK_BYTES} bytes")
        if not 0 <= self.crc <= 0xFFFF:
            raise ValueError("crc must fit in 16 bits")

    def to_bytes(self):
        return bytes(self.data) + self.crc.to_bytes(2, "big")

    @classmethod
    def from_bytes(cls, raw):
        raw = bytes(raw)
        if len(raw) != UNIT_BYTES:
            raise ValueError(f"a serialized unit is {UNIT_BYTES} bytes, got {len(raw)}")
        return cls(raw[:CHUNK_BYTES], int.from_bytes(raw[CHUNK_BYTES:], "big"))


def make_unit(data):
    data = bytes(data)
    if len(data) != CHUNK_BYTES:
        raise ValueError(f"chunk must be {CHUNK_BYTES} bytes, got {len(data)}")
    return ChunkUnit(data, crc16(data))


def check_unit(unit):
    return crc16(unit.data) == unit.crc


# -- array helpers used by layout/controller; a row is one serialized unit --

def _make_table():
    table = np.zeros(256, dtype=np.uint16)
    for b in range(256):
        c = b << 8
        for _ in range(8):
            c = ((c << 1) ^ 0x1021) if c & 0x8000 else (c << 1)
        table[b] = c & 0xFFFF
    return table


_TABLE = _make_table()
_VECTOR_MIN_ROWS = 2048  # below this a crc_hqx loop is faster


def crc16_rows(payload):
    """Table-driven CRC over each row of an (N, L) uint8 array."""
    payload = np.asarray(payload, dtype=np.uint8)
    crc = np.full(payload.shape[0], CRC_INIT, dtype=np.uint16)
    for col in range(payload.shape[1]):
        idx = (crc >> 8) ^ payload[:, col]
        crc = (crc << 8) ^ _TABLE[idx]
    return crc


def seal_rows(rows):
    """Recompute the CRC bytes of each (.., 34) uint8 row in place."""
    if not rows.flags.c_contiguous:
        raise ValueError("seal_rows needs a C-contiguous array to update in place")
    flat = rows.reshape(-1, UNIT_BYTES)
    if flat.shape[0] >= _VECTOR_MIN_ROWS:
        crc = crc16_rows(flat[:, :CHUNK_BYTES])
        flat[:, CHUNK_BYTES] = crc >> 8
        flat[:, CHUNK_BYTES + 1] = crc & 0xFF
        return rows
    raw = flat.tobytes()
    for n, i in enumerate(range(0, len(raw), UNIT_BYTES)):
        c = binascii.crc_hqx(raw[i:i + CHUNK_BYTES], CRC_INIT)
        flat[n, CHUNK_BYTES] = c >> 8
        flat[n, CHUNK_BYTES + 1] = c & 0xFF
    return rows


def check_rows(rows):
    """Boolean array: which (.., 34) rows carry a matching CRC."""
    flat = rows.reshape(-1, UNIT_BYTES)
    if flat.shape[0] >= _VECTOR_MIN_ROWS:
        stored = (flat[:, CHUNK_BYTES].astype(np.uint16) << 8) | flat[:, CHUNK_BYTES + 1]
        return (crc16_rows(flat[:, :CHUNK_BYTES]) == stored).reshape(rows.shape[:-1])
    raw = flat.tobytes()
    ok = [binascii.crc_hqx(raw[i:i + CHUNK_BYTES], CRC_INIT)
          == int.from_bytes(raw[i + CHUNK_BYTES:i + UNIT_BYTES], "big")
          for i in range(0, len(raw), UNIT_BYTES)]
    return np.array(ok, dtype=bool).reshape(rows.shape[:-1])
