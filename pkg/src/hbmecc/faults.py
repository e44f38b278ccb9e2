"""Seeded i.i.d. raw bit-error injection.

Every stored bit flips independently with probability ``ber``.  Randomness
comes from numpy's PCG64 seeded through ``SeedSequence(master_seed,
spawn_key=label)``, so a label such as ``(codeword_id, epoch)`` always
yields the same flips and distinct labels yield independent streams.
"""

import math
from dataclasses import dataclass

import numpy as np

from .crc import UNIT_BITS

# at or below this rate injection draws geometric gaps instead of one
# uniform per bit
SKIP_SAMPLING_MAX_BER = 1e-2


@dataclass(frozen=True)
class FaultConfig:
    ber: float
    master_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"ber must be in [0, 1], got {self.ber}")
        if not 0 <= self.master_seed < 1 << 64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")


def substream(master_seed, label):
    if isinstance(label, int):
        label = (label,)
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(x) for x in label))
    return np.random.Generator(np.random.PCG64(ss))


def _skip_positions(rng, nbits, p):
    expected = nbits * p
    batch = int(expected + 6 * math.sqrt(expected) + 16)
    out = []
    last = -1
    while True:
        gaps = rng.geometric(p, size=batch)
        pos = last + np.cumsum(gaps)
        inside = pos[pos < nbits]
        out.append(inside)
        if inside.size < pos.size:
            break
        last = int(pos[-1])
    return np.concatenate(out) if len(out) > 1 else out[0]


def flip_positions(rng, nbits, p, method=None):
    """Sorted indices of flipped bits among ``nbits`` at rate ``p``.

    ``method`` is ``"bernoulli"`` (one uniform per bit), ``"skip"``
    (geometric gaps) or ``None`` to pick by rate.
    """
    if p <= 0.0 or nbits == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(nbits, dtype=np.int64)
    if method is None:
        method = "skip" if p <= SKIP_SAMPLING_MAX_BER else "bernoulli"
    if method == "skip":
        return _skip_positions(rng, nbits, p).astype(np.int64)
    if method == "bernoulli":
        return np.flatnonzero(rng.random(nbits) < p)
    raise ValueError(f"unknown sampling method {method!r}")


def apply_flips(buf, positions):
    """XOR single bits into a uint8 array; bit 0 is the MSB of byte 0."""
    flat = buf.reshape(-1)
    if positions.size:
        masks = (np.uint8(0x80) >> (positions & 7).astype(np.uint8)).astype(np.uint8)
        np.bitwise_xor.at(flat, positions >> 3, masks)


def inject(stored, fc, label, method=None):
    """Flip bits of ``stored`` in place; return how many flipped.

    ``stored`` is a :class:`~hbmecc.layout.StoredCodeword` or any uint8 array
    of serialized units.
    """
    buf = getattr(stored, "units", stored)
    if fc.ber == 0.0:
        return 0
    positions = flip_positions(substream(fc.master_seed, label), buf.size * 8, fc.ber, method)
    apply_flips(buf, positions)
    return int(positions.size)


def unit_error_prob(p, bits=UNIT_BITS):
    """``1 - (1 - p)**bits``, stable for tiny ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if p == 1.0:
        return 1.0 if bits > 0 else 0.0
    return -math.expm1(bits * math.log1p(-p))


def count_corrupted_units(p, n_units, rng, bits=UNIT_BITS, block_units=10**7):
    """Monte Carlo: how many of ``n_units`` reads see at least one flipped bit.

    Skip-sampled, so 10^8 unit reads at p = 1e-7 take well under a second.
    """
    hit = 0
    done = 0
    while done < n_units:
        units = min(block_units, n_units - done)
        pos = flip_positions(rng, units * bits, p, method="skip")
        hit += np.unique(pos // bits).size
        done += units
    return hit
