"""Bit-plane decomposition and importance-adaptive protection.

A block of ``m`` values, each ``n`` bits wide, is viewed as ``n`` planes of
``m`` bits.  Planes listed in the protected set go through the CRC/RS
pipeline; the rest are stored raw.  In memory the protected stream is laid
out plane-major (all of plane ``S[0]``, then ``S[1]``, ...) and padded to
whole 32-byte chunks per codeword.
"""

import math
from dataclasses import dataclass

import numpy as np

from .crc import CHUNK_BYTES
from .faults import flip_positions

BF16_BITS = 16
BF16_FIELDS = {
    "sign": frozenset({15}),
    "exponent": frozenset(range(7, 15)),
    "mantissa": frozenset(range(0, 7)),
}
# smallest positive normal bf16 (same exponent range as float32)
BF16_TINY = float(np.finfo(np.float32).tiny)
BLOWUP_THRESHOLD = 1e3

CHUNK_BITS = CHUNK_BYTES * 8


@dataclass(frozen=True)
class ProtectionConfig:
    n: int
    planes: frozenset

    def __init__(self, n, planes):
        planes = frozenset(int(p) for p in planes)
        if n < 1:
            raise ValueError("n must be >= 1")
        bad = [p for p in planes if not 0 <= p < n]
        if bad:
            raise ValueError(f"plane indices {sorted(bad)} outside [0, {n})")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "planes", planes)

    @classmethod
    def full(cls, n=BF16_BITS):
        return cls(n, range(n))

    @classmethod
    def bf16(cls, *field_names):
        return cls(BF16_BITS, frozenset().union(*(bf16_field_planes(f) for f in field_names)))

    @property
    def gamma(self):
        return len(self.planes) / self.n

    @property
    def protected(self):
        return tuple(sorted(self.planes))

    @property
    def bypassed(self):
        return tuple(i for i in range(self.n) if i not in self.planes)

    def decoder_workload_reduction(self):
        """Fraction of RS decoder work avoided relative to full protection."""
        return 1.0 - self.gamma


@dataclass
class PlaneBlock:
    m: int
    protected_bits: np.ndarray  # (|S|, m) uint8, ascending plane order
    bypass_bits: np.ndarray     # (n - |S|, m) uint8, ascending plane order

    @property
    def total_bits(self):
        return self.protected_bits.size + self.bypass_bits.size


def split_planes(values, pc):
    values = np.asarray(values, dtype=np.uint64).reshape(-1)
    if values.size and int(values.max()) >> pc.n:
        raise ValueError(f"value does not fit in {pc.n} bits")
    shifts = np.arange(pc.n, dtype=np.uint64)[:, None]
    planes = ((values[None, :] >> shifts) & np.uint64(1)).astype(np.uint8)
    return PlaneBlock(values.size,
                      planes[list(pc.protected)].reshape(-1, values.size),
                      planes[list(pc.bypassed)].reshape(-1, values.size))


def merge_planes(block, pc):
    if block.protected_bits.shape != (len(pc.protected), block.m) or \
            block.bypass_bits.shape != (len(pc.bypassed), block.m):
        raise ValueError("plane block shape does not match protection config")
    out = np.zeros(block.m, dtype=np.uint64)
    for bits, idx in ((block.protected_bits, pc.protected), (block.bypass_bits, pc.bypassed)):
        for row, plane in zip(bits, idx):
            out |= row.astype(np.uint64) << np.uint64(plane)
    return out


def protected_stream(block):
    """Protected planes packed plane-major into bytes, zero-padded to 32B chunks."""
    raw = np.packbits(block.protected_bits.reshape(-1))
    pad = (-raw.size) % CHUNK_BYTES
    return np.concatenate((raw, np.zeros(pad, dtype=np.uint8)))


def bf16_field_planes(field):
    try:
        return BF16_FIELDS[field]
    except KeyError:
        raise ValueError(f"unknown BF16 field {field!r}; choose from {sorted(BF16_FIELDS)}") from None


class PlaneLayout:
    """Where the protected bits of a codeword's user payload end up.

    One plane block covers the ``d`` user chunks of a codeword, i.e.
    ``m = 256 * d / n`` values.  Maps user chunk ranges to the protected
    chunks that hold their bits and counts the bypassed bytes.
    """

    def __init__(self, pc, data_chunks):
        if CHUNK_BITS % pc.n:
            raise ValueError(f"value width {pc.n} does not divide a 256-bit chunk")
        self.pc = pc
        self.data_chunks = data_chunks
        self.values_per_chunk = CHUNK_BITS // pc.n
        self.m = self.values_per_chunk * data_chunks
        self.protected_bits = len(pc.planes) * self.m
        self.protected_chunks = math.ceil(self.protected_bits / CHUNK_BITS)

    def bypass_bytes(self, k):
        """Raw bytes moved for ``k`` user chunks outside the ECC pipeline."""
        return len(self.pc.bypassed) * self.values_per_chunk * k // 8

    def protected_span(self, offset, k):
        """Sorted protected-chunk indices holding bits of user chunks ``[offset, offset+k)``."""
        lo = offset * self.values_per_chunk
        hi = (offset + k) * self.values_per_chunk
        touched = set()
        for slot in range(len(self.pc.planes)):
            first = (slot * self.m + lo) // CHUNK_BITS
            last = (slot * self.m + hi - 1) // CHUNK_BITS
            touched.update(range(first, last + 1))
        return sorted(touched)


# -- BF16 sensitivity proxy ---------------------------------------------------

@dataclass
class FieldFlipStats:
    field: str
    rate: float
    seed: int
    flipped_bits: int = 0
    values_changed: int = 0
    max_relative_error: float = 0.0
    mean_relative_error: float = 0.0
    blowup_count: int = 0


FLIP_STATS_HEADER = ["field", "rate", "seed", "flipped_bits", "values_changed",
                     "max_rel_err", "mean_rel_err", "blowup_count"]


def flip_stats_row(s):
    return [s.field, f"{s.rate:.6g}", s.seed, s.flipped_bits, s.values_changed,
            f"{s.max_relative_error:.6g}", f"{s.mean_relative_error:.6g}", s.blowup_count]


def bf16_to_float(bits):
    return (np.asarray(bits, dtype=np.uint32) << 16).view(np.float32)


def float_to_bf16(x):
    """Round-to-nearest-even truncation of float32 to bf16 bit patterns."""
    u = np.asarray(x, dtype=np.float32).view(np.uint32).astype(np.uint64)
    u = u + 0x7FFF + ((u >> 16) & 1)
    return (u >> 16).astype(np.uint16)


def random_bf16(count, rng):
    """Nonzero normal-range bf16 patterns drawn from a standard normal."""
    out = float_to_bf16(rng.standard_normal(count).astype(np.float32))
    mag = out & 0x7FFF
    # re-draw the (vanishingly rare) zero or subnormal results
    bad = (mag >> 7) == 0
    while bad.any():
        out[bad] = float_to_bf16(rng.standard_normal(int(bad.sum())).astype(np.float32))
        bad = ((out & 0x7FFF) >> 7) == 0
    return out


def field_flip_stats(values, field, rate, seed):
    """Flip each bit of one BF16 field at ``rate`` and measure the damage.

    Relative error is ``|x' - x| / max(|x|, BF16_TINY)``.  Non-finite results
    and errors above ``BLOWUP_THRESHOLD`` count as blowups; the max/mean are
    taken over changed values whose result is still finite.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must be in [0, 1], got {rate}")
    bits = np.asarray(values, dtype=np.uint16).reshape(-1)
    x = bf16_to_float(bits).astype(np.float64)
    if not np.isfinite(x).all():
        raise ValueError("input values must be finite")
    planes = np.array(sorted(bf16_field_planes(field)), dtype=np.uint16)
    stats = FieldFlipStats(field, rate, seed)
    rng = np.random.default_rng(seed)
    pos = flip_positions(rng, bits.size * planes.size, rate)
    if pos.size == 0:
        return stats
    which = pos // planes.size
    masks = (np.uint16(1) << planes[pos % planes.size]).astype(np.uint16)
    flipped = bits.copy()
    np.bitwise_xor.at(flipped, which, masks)
    changed = np.unique(which)
    x0 = x[changed]
    with np.errstate(invalid="ignore", over="ignore"):
        y = bf16_to_float(flipped[changed]).astype(np.float64)
        finite = np.isfinite(y)
        rel = np.abs(y - x0) / np.maximum(np.abs(x0), BF16_TINY)
    blow = ~finite | (rel > BLOWUP_THRESHOLD)
    stats.flipped_bits = int(pos.size)
    stats.values_changed = int(changed.size)
    stats.blowup_count = int(blow.sum())
    if finite.any():
        stats.max_relative_error = float(rel[finite].max())
        stats.mean_relative_error = float(rel[finite].mean())
    return stats
