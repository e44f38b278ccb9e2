"""Shortened systematic Reed-Solomon code over GF(2^16).

Conventions: a codeword of length ``n = d_syms + q_syms`` is stored as a
vector whose element ``i`` is the coefficient of ``x**(n - 1 - i)``.  The
first ``d_syms`` elements are data, the last ``q_syms`` are parity, and the
generator polynomial is ``prod_{i=1..q} (x - alpha**i)``.

Decoding is syndrome computation, Berlekamp-Massey, Chien search and Forney,
bounded to ``t = q // 2`` symbol errors.  A word with all-zero syndromes is
returned without running the locator machinery.
"""

from collections import Counter
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .gf import EXP, EXP_NP, EXPZ_NP, LOG, LOG_NP, LOGZ_NP, ORDER, gf_mul, gf_scale_vec

# instrumentation: "decodes" counts rs_decode calls, "locator_runs" counts
# Berlekamp-Massey invocations (skipped on the zero-syndrome fast path)
DECODER_COUNTERS = Counter()


class DecodeFailure(Exception):
    """The received word is farther than ``t`` symbols from any codeword."""


@dataclass(frozen=True)
class RsGeometry:
    d_syms: int
    q_syms: int

    def __post_init__(self):
        if self.d_syms < 1 or self.q_syms < 1:
            raise ValueError("d_syms and q_syms must both be >= 1")
        if self.d_syms + self.q_syms > ORDER:
            raise ValueError(
                f"codeword length {self.d_syms + self.q_syms} exceeds {ORDER}")

    @property
    def t(self):
        return self.q_syms // 2

    @property
    def n(self):
        return self.d_syms + self.q_syms


@dataclass(frozen=True)
class SparseDataVector:
    """Data vector with zeros everywhere except ``positions``."""

    length: int
    positions: tuple
    values: tuple

    def __post_init__(self):
        if len(self.positions) != len(self.values):
            raise ValueError("positions and values differ in length")
        prev = -1
        for p in self.positions:
            if p <= prev or p >= self.length:
                raise ValueError(
                    "positions must be strictly increasing and < length")
            prev = p
        for v in self.values:
            if not 0 <= v < 1 << 16:
                raise ValueError(f"symbol {v} is not a 16-bit value")

    @classmethod
    def from_dense(cls, dense, positions):
        positions = tuple(int(p) for p in positions)
        return cls(len(dense), positions, tuple(int(dense[p]) for p in positions))

    def to_dense(self):
        out = np.zeros(self.length, dtype=np.int64)
        if self.positions:
            out[list(self.positions)] = self.values
        return out


@dataclass
class DecodeOutcome:
    data: np.ndarray
    error_count: int
    error_positions: tuple = ()


def _as_symbols(seq, expected, what):
    arr = np.asarray(seq, dtype=np.int64)
    if arr.ndim != 1 or arr.shape[0] != expected:
        raise ValueError(f"{what} must have length {expected}, got {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 0xFFFF):
        raise ValueError(f"{what} contains values outside 16 bits")
    return arr


@lru_cache(maxsize=None)
def generator_poly(q_syms):
    """Coefficients of g(x), highest degree first (leading 1 included)."""
    g = [1]
    for i in range(1, q_syms + 1):
        root = EXP[i]
        nxt = g + [0]
        for j, c in enumerate(g):
            nxt[j + 1] ^= gf_mul(c, root)
        g = nxt
    return tuple(g)


@lru_cache(maxsize=32)
def _parity_rows(geom):
    """Parity contribution of a unit symbol at each data position.

    Row ``i`` is ``x**(q + d_syms - 1 - i) mod g(x)`` laid out like a parity
    vector, so encoding is an XOR of scaled rows.
    """
    q = geom.q_syms
    g_low = np.array(generator_poly(q)[1:], dtype=np.int64)
    rows = np.empty((geom.d_syms, q), dtype=np.int64)
    rem = g_low.copy()
    for i in range(geom.d_syms - 1, -1, -1):
        rows[i] = rem
        top = int(rem[0])
        rem = np.concatenate((rem[1:], [0]))
        if top:
            rem ^= gf_scale_vec(top, g_low)
    rows.setflags(write=False)
    log_rows = LOGZ_NP[rows]
    log_rows.setflags(write=False)
    return rows, log_rows


def _encode_positions(positions, values, geom):
    _, log_rows = _parity_rows(geom)
    positions = np.asarray(positions, dtype=np.int64)
    values = np.asarray(values, dtype=np.int64)
    keep = values != 0
    positions, values = positions[keep], values[keep]
    if positions.size == 0:
        return np.zeros(geom.q_syms, dtype=np.int64)
    terms = EXPZ_NP[log_rows[positions] + LOG_NP[values][:, None]]
    return np.bitwise_xor.reduce(terms, axis=0)


def rs_encode(data, geom):
    """Return the ``q_syms`` parity symbols for ``data``."""
    data = _as_symbols(data, geom.d_syms, "data")
    return _encode_positions(np.arange(geom.d_syms), data, geom)


def rs_encode_batch(data, geom, batch=128):
    """Vectorised :func:`rs_encode` over the rows of a 2-D array."""
    data = np.asarray(data, dtype=np.int64)
    if data.ndim != 2 or data.shape[1] != geom.d_syms:
        raise ValueError(f"expected shape (*, {geom.d_syms}), got {data.shape}")
    _, log_rows = _parity_rows(geom)
    out = np.zeros((data.shape[0], geom.q_syms), dtype=np.int64)
    for lo in range(0, data.shape[0], batch):
        logs = LOGZ_NP[data[lo:lo + batch]]
        terms = EXPZ_NP[logs[:, :, None] + log_rows[None, :, :]]
        out[lo:lo + batch] = np.bitwise_xor.reduce(terms, axis=1)
    return out


def rs_parity_delta(old, new, geom):
    """Parity change caused by replacing ``old`` symbols with ``new`` ones.

    Both sparse vectors are encoded on their own and the results XORed;
    only the generator rows of the touched positions are visited.  XOR the
    returned vector into the stored parity to obtain the updated parity.
    """
    if old.length != geom.d_syms or new.length != geom.d_syms:
        raise ValueError("sparse vector length does not match geometry")
    if old.positions != new.positions:
        raise ValueError("old and new must cover the same positions")
    p_old = _encode_positions(old.positions, old.values, geom)
    p_new = _encode_positions(new.positions, new.values, geom)
    return p_new ^ p_old


def syndromes(received, geom):
    """``S_j = r(alpha**j)`` for ``j = 1..q_syms``."""
    r = _as_symbols(received, geom.n, "received word")
    return _syndromes(r, geom)


_TABLE_LIMIT = 1 << 22  # entries; bigger geometries compute exponents per call


@lru_cache(maxsize=32)
def _syndrome_exponents(geom):
    """``(j * (n - 1 - i)) mod ORDER`` for j = 1..q (rows) and every position i."""
    powers = geom.n - 1 - np.arange(geom.n, dtype=np.int64)
    j = np.arange(1, geom.q_syms + 1, dtype=np.int64)[:, None]
    table = (j * powers[None, :]) % ORDER
    table.setflags(write=False)
    return table


@lru_cache(maxsize=32)
def _chien_exponents(geom):
    """``(-deg * (n - 1 - i)) mod ORDER`` for deg = 0..t and every position i."""
    powers = geom.n - 1 - np.arange(geom.n, dtype=np.int64)
    deg = np.arange(geom.t + 1, dtype=np.int64)[:, None]
    table = (-deg * powers[None, :]) % ORDER
    table.setflags(write=False)
    return table


def _syndromes(r, geom):
    if geom.q_syms * geom.n <= _TABLE_LIMIT:
        terms = EXPZ_NP[LOGZ_NP[r][None, :] + _syndrome_exponents(geom)]
        return np.bitwise_xor.reduce(terms, axis=1)
    idx = np.flatnonzero(r)
    if idx.size == 0:
        return np.zeros(geom.q_syms, dtype=np.int64)
    powers = geom.n - 1 - idx
    j = np.arange(1, geom.q_syms + 1, dtype=np.int64)[:, None]
    exps = (LOG_NP[r[idx]][None, :] + j * powers[None, :]) % ORDER
    return np.bitwise_xor.reduce(EXP_NP[exps], axis=1)


def _chien(lam, geom):
    """Positions ``i`` with ``lam(alpha**-(n-1-i)) == 0``."""
    if (geom.t + 1) * geom.n <= _TABLE_LIMIT:
        table = _chien_exponents(geom)[:len(lam)]
        logs = LOGZ_NP[np.asarray(lam, dtype=np.int64)][:, None]
        vals = np.bitwise_xor.reduce(EXPZ_NP[logs + table], axis=0)
    else:
        powers = geom.n - 1 - np.arange(geom.n, dtype=np.int64)
        vals = _eval_at_inverse_powers(lam, powers)
    return np.flatnonzero(vals == 0)


def _eval_at_inverse_powers(coeffs, powers):
    """Evaluate a low-first polynomial at ``alpha**-e`` for each ``e``."""
    out = np.zeros(powers.shape, dtype=np.int64)
    for deg, c in enumerate(coeffs):
        if c:
            out ^= EXP_NP[(LOG[c] - deg * powers) % ORDER]
    return out


def _berlekamp_massey(synd):
    """Connection polynomial (low-first, C[0] = 1) and its length L."""
    exp, log = EXP, LOG
    slog = [log[x] if x else None for x in synd]
    C = [1]
    B = [1]
    L = 0
    m = 1
    b = 1
    for n_, s in enumerate(synd):
        d = s
        for i in range(1, min(L, len(C) - 1) + 1):
            ci = C[i]
            sl = slog[n_ - i]
            if ci and sl is not None:
                d ^= exp[log[ci] + sl]
        if d == 0:
            m += 1
            continue
        coef_log = (log[d] - log[b]) % ORDER
        need = len(B) + m
        if len(C) < need:
            C = C + [0] * (need - len(C))
        T = list(C) if 2 * L <= n_ else None
        for i, bi in enumerate(B):
            if bi:
                C[i + m] ^= exp[coef_log + log[bi]]
        if T is not None:
            L = n_ + 1 - L
            B = T
            b = d
            m = 1
        else:
            m += 1
    if any(C[L + 1:]):
        # degree above L cannot happen for a consistent sequence
        raise DecodeFailure("inconsistent connection polynomial")
    return C[:L + 1], L


def rs_decode(received, geom):
    """Correct up to ``t`` symbol errors and return the data symbols.

    Raises :class:`DecodeFailure` when the word is not within distance ``t``
    of a codeword *as far as the decoder can tell*.  Beyond ``t`` errors a
    bounded-distance decoder may also land on the wrong codeword; callers
    holding ground truth should compare.
    """
    r = _as_symbols(received, geom.n, "received word")
    DECODER_COUNTERS["decodes"] += 1
    synd = _syndromes(r, geom)
    if not synd.any():
        return DecodeOutcome(r[:geom.d_syms].copy(), 0)

    DECODER_COUNTERS["locator_runs"] += 1
    lam, L = _berlekamp_massey([int(s) for s in synd])
    if L > geom.t:
        raise DecodeFailure(f"error locator degree {L} exceeds t={geom.t}")

    roots = _chien(lam, geom)
    if roots.size != L:
        raise DecodeFailure(
            f"locator has {roots.size} roots in range, expected {L}")

    # error evaluator Omega = S(x) * Lambda(x) mod x^q; its degree is below L
    omega = np.zeros(L, dtype=np.int64)
    log_synd = LOGZ_NP[synd[:L]]
    for i, li in enumerate(lam[:L]):
        if li:
            omega[i:] ^= EXPZ_NP[LOG[li] + log_synd[:L - i]]
    omega = omega.tolist()
    dlam = [lam[i] if i % 2 == 1 else 0 for i in range(1, len(lam))]

    err_powers = geom.n - 1 - roots
    num = _eval_at_inverse_powers(omega, err_powers)
    den = _eval_at_inverse_powers(dlam, err_powers)
    if np.any(den == 0) or np.any(num == 0):
        raise DecodeFailure("degenerate error magnitude")
    mags = EXP_NP[(LOG_NP[num] - LOG_NP[den]) % ORDER]

    corrected = r.copy()
    corrected[roots] ^= mags
    return DecodeOutcome(corrected[:geom.d_syms], int(L), tuple(int(i) for i in roots))
