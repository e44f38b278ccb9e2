"""Codeword geometry, chunk packing, striping and the store image.

A codeword holds ``d`` 32-byte data chunks followed by ``r`` parity chunks.
Every chunk travels as a 34-byte CRC unit.  Symbols are big-endian byte
pairs, data symbols first, then the ``q`` parity symbols; parity bytes past
``2q`` are zero padding that the RS code never sees.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .crc import CHUNK_BYTES, UNIT_BYTES, ChunkUnit, check_rows, seal_rows
from .rs import RsGeometry, rs_encode, rs_encode_batch

MAX_STRIPE = 16

PRESETS = {"rate-16/17": 1, "fixed-parity": 2}
FIXED_PARITY_SYMS = 16

DUMP_MAGIC = b"HBMC"
_HEADER = struct.Struct(">4sIIHH")  # magic, d, q, s, preset id -> 16 bytes


@dataclass(frozen=True)
class CodewordConfig:
    data_chunks: int
    parity_syms: int
    stripe_width: int = MAX_STRIPE
    preset: str = "custom"
    geom: RsGeometry = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.data_chunks < 1:
            raise ValueError("data_chunks must be >= 1")
        if self.parity_syms < 1:
            raise ValueError("parity_syms must be >= 1")
        if not 1 <= self.stripe_width <= MAX_STRIPE:
            raise ValueError(f"stripe_width must be in [1, {MAX_STRIPE}]")
        object.__setattr__(self, "geom", RsGeometry(16 * self.data_chunks, self.parity_syms))

    @classmethod
    def from_preset(cls, codeword_bytes, preset, stripe_width=MAX_STRIPE):
        """``codeword_bytes`` is the user payload (64 -> two data chunks)."""
        if codeword_bytes < CHUNK_BYTES or codeword_bytes % CHUNK_BYTES:
            raise ValueError(f"codeword size {codeword_bytes} is not a multiple of 32")
        d = codeword_bytes // CHUNK_BYTES
        if preset == "rate-16/17":
            q = d
        elif preset == "fixed-parity":
            q = FIXED_PARITY_SYMS
        else:
            raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        return cls(d, q, stripe_width, preset)

    @property
    def d(self):
        return self.data_chunks

    @property
    def q(self):
        return self.parity_syms

    @property
    def parity_chunks(self):
        return math.ceil(2 * self.parity_syms / CHUNK_BYTES)

    @property
    def wire_chunks(self):
        return self.data_chunks + self.parity_chunks

    @property
    def codeword_bytes(self):
        return self.data_chunks * CHUNK_BYTES

    @property
    def wire_bytes(self):
        return self.wire_chunks * UNIT_BYTES

    @property
    def rate(self):
        return 16 * self.data_chunks / (16 * self.data_chunks + self.parity_syms)

    @property
    def t(self):
        return self.geom.t


class StoredCodeword:
    """Bit image of one codeword: ``(m_w, 34)`` uint8 rows in chunk order.

    ``units`` may be a view into a larger store, so in-place edits (fault
    injection, writes) land in the backing memory.
    """

    def __init__(self, units, config):
        if units.shape != (config.wire_chunks, UNIT_BYTES):
            raise ValueError(f"expected {(config.wire_chunks, UNIT_BYTES)}, got {units.shape}")
        self.units = units
        self.config = config

    def unit(self, i):
        return ChunkUnit.from_bytes(self.units[i].tobytes())

    def data_bytes(self):
        return self.units[:self.config.d, :CHUNK_BYTES].tobytes()

    def clean(self):
        return bool(check_rows(self.units).all())

    def copy(self):
        return StoredCodeword(self.units.copy(), self.config)

    def to_bytes(self):
        return self.units.tobytes()

    def __eq__(self, other):
        if not isinstance(other, StoredCodeword):
            return NotImplemented
        return self.config == other.config and np.array_equal(self.units, other.units)


def _data_array(data, config):
    if isinstance(data, (bytes, bytearray, memoryview)):
        arr = np.frombuffer(bytes(data), dtype=np.uint8)
        if arr.size != config.d * CHUNK_BYTES:
            raise ValueError(f"expected {config.d * CHUNK_BYTES} data bytes, got {arr.size}")
        return arr.reshape(config.d, CHUNK_BYTES)
    if isinstance(data, np.ndarray):
        arr = data.astype(np.uint8, copy=False)
    else:
        chunks = [bytes(c) for c in data]
        if any(len(c) != CHUNK_BYTES for c in chunks):
            raise ValueError("every data chunk must be 32 bytes")
        arr = np.frombuffer(b"".join(chunks), dtype=np.uint8).reshape(-1, CHUNK_BYTES)
    if arr.shape != (config.d, CHUNK_BYTES):
        raise ValueError(f"expected {config.d} chunks of 32 bytes, got shape {arr.shape}")
    return arr


def bytes_to_symbols(raw):
    if isinstance(raw, (bytes, bytearray, memoryview)):
        raw = np.frombuffer(raw, dtype=np.uint8)
    raw = np.ascontiguousarray(raw, dtype=np.uint8).reshape(-1)
    return raw.view(">u2").astype(np.int64)


def symbols_to_bytes(symbols):
    return np.asarray(symbols, dtype=">u2").view(np.uint8)


def parity_rows(parity, config):
    """Pack parity symbols into ``r`` zero-padded 32-byte rows."""
    out = np.zeros(config.parity_chunks * CHUNK_BYTES, dtype=np.uint8)
    out[:2 * config.q] = symbols_to_bytes(parity)
    return out.reshape(config.parity_chunks, CHUNK_BYTES)


def build_codeword(data, config):
    data = _data_array(data, config)
    units = np.zeros((config.wire_chunks, UNIT_BYTES), dtype=np.uint8)
    units[:config.d, :CHUNK_BYTES] = data
    units[config.d:, :CHUNK_BYTES] = parity_rows(rs_encode(bytes_to_symbols(data), config.geom), config)
    seal_rows(units)
    return StoredCodeword(units, config)


def build_codewords(data, config):
    """Encode many codewords at once: ``(N, d, 32)`` -> ``(N, m_w, 34)``."""
    data = np.asarray(data, dtype=np.uint8)
    n = data.shape[0]
    if data.shape[1:] != (config.d, CHUNK_BYTES):
        raise ValueError(f"expected (N, {config.d}, 32), got {data.shape}")
    syms = data.reshape(n, -1).view(">u2").astype(np.int64)
    parity = rs_encode_batch(syms, config.geom)
    units = np.zeros((n, config.wire_chunks, UNIT_BYTES), dtype=np.uint8)
    units[:, :config.d, :CHUNK_BYTES] = data
    pbytes = np.zeros((n, config.parity_chunks * CHUNK_BYTES), dtype=np.uint8)
    pbytes[:, :2 * config.q] = parity.astype(">u2").view(np.uint8).reshape(n, -1)
    units[:, config.d:, :CHUNK_BYTES] = pbytes.reshape(n, config.parity_chunks, CHUNK_BYTES)
    seal_rows(units)
    return units


def map_chunk_to_channel(config, chunk_index):
    if not 0 <= chunk_index < config.wire_chunks:
        raise ValueError(f"chunk index {chunk_index} outside [0, {config.wire_chunks})")
    return chunk_index % config.stripe_width, chunk_index // config.stripe_width


def symbol_view(stored, config=None):
    """RS-domain view of a stored image: ``16d + q`` symbols, CRCs and pad excluded."""
    config = config or stored.config
    units = stored.units if isinstance(stored, StoredCodeword) else np.asarray(stored)
    data = bytes_to_symbols(units[:config.d, :CHUNK_BYTES])
    parity = bytes_to_symbols(units[config.d:, :CHUNK_BYTES])[:config.q]
    return np.concatenate((data, parity))


class MemoryStore:
    """Array of codewords plus the host's ground-truth copy of the user data.

    ``truth`` is what the host last wrote; the simulator compares delivered
    data against it to spot silent corruption.  A lazily built store encodes
    each codeword on first access; its content depends only on ``seed`` and
    the codeword id, never on access order.
    """

    def __init__(self, units, truth, config, seed=None, ready=None):
        self.units = units
        self.truth = truth
        self.config = config
        self.seed = seed
        self.ready = ready  # None: everything materialised

    @classmethod
    def random(cls, config, n_codewords, seed=0, lazy=False):
        units = np.zeros((n_codewords, config.wire_chunks, UNIT_BYTES), dtype=np.uint8)
        truth = np.zeros((n_codewords, config.d, CHUNK_BYTES), dtype=np.uint8)
        store = cls(units, truth, config, seed, np.zeros(n_codewords, dtype=bool))
        if not lazy:
            store.materialize_all()
        return store

    @classmethod
    def zeros(cls, config, n_codewords):
        truth = np.zeros((n_codewords, config.d, CHUNK_BYTES), dtype=np.uint8)
        return cls(build_codewords(truth, config), truth, config)

    @property
    def n_codewords(self):
        return self.units.shape[0]

    def _fill(self, ids):
        for cw in ids:
            rng = np.random.default_rng([self.seed, int(cw)])
            self.truth[cw] = rng.integers(0, 256, (self.config.d, CHUNK_BYTES), dtype=np.uint8)
        self.units[ids] = build_codewords(self.truth[ids], self.config)
        self.ready[ids] = True

    def materialize_all(self):
        if self.ready is not None:
            todo = np.flatnonzero(~self.ready)
            for lo in range(0, todo.size, 1024):
                self._fill(todo[lo:lo + 1024])
            self.ready = None

    def image(self, cw_id):
        """Writable ``(m_w, 34)`` view of one codeword, built on first touch."""
        if not 0 <= cw_id < self.n_codewords:
            raise ValueError(f"codeword {cw_id} outside store of {self.n_codewords}")
        if self.ready is not None and not self.ready[cw_id]:
            self._fill(np.array([cw_id]))
        return self.units[cw_id]

    def codeword(self, cw_id):
        return StoredCodeword(self.image(cw_id), self.config)

    def dump(self, fh):
        self.materialize_all()
        fh.write(dump_header(self.config))
        fh.write(self.units.tobytes())


def dump_header(config):
    return _HEADER.pack(DUMP_MAGIC, config.d, config.q, config.stripe_width,
                        PRESETS.get(config.preset, 0))


def dump_codeword(stored):
    return dump_header(stored.config) + stored.to_bytes()


def load_dump(raw):
    """Parse a dump; returns ``(config, units)`` with units ``(N, m_w, 34)``."""
    raw = bytes(raw)
    if len(raw) < _HEADER.size:
        raise ValueError("dump shorter than its header")
    magic, d, q, s, preset_id = _HEADER.unpack_from(raw)
    if magic != DUMP_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    names = {v: k for k, v in PRESETS.items()}
    config = CodewordConfig(d, q, s, names.get(preset_id, "custom"))
    body = np.frombuffer(raw, dtype=np.uint8, offset=_HEADER.size)
    if body.size % config.wire_bytes:
        raise ValueError("dump body is not a whole number of codewords")
    return config, body.reshape(-1, config.wire_chunks, UNIT_BYTES).copy()
