"""Arithmetic in GF(2^16).

Elements are plain ints in ``[0, 65535]``; addition is XOR.  Multiplication
goes through log/antilog tables built once at import.  The tables are also
exposed as numpy arrays for the vectorised paths in :mod:`hbmecc.rs`.
"""

import numpy as np

FIELD_BITS = 16
FIELD_SIZE = 1 << FIELD_BITS
ORDER = FIELD_SIZE - 1  # multiplicative group order
# x^16 + x^12 + x^3 + x + 1
PRIM_POLY = 0x1100B


class FieldConstructionError(RuntimeError):
    pass


def _build_tables(prim):
    exp = [0] * (2 * ORDER)
    log = [-1] * FIELD_SIZE
    x = 1
    for i in range(ORDER):
        if log[x] != -1:
            # alpha^i revisited an earlier element: the group order is < 2^16 - 1
            raise FieldConstructionError(
                f"0x{prim:X} is not primitive: alpha has order {i}")
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & FIELD_SIZE:
            x ^= prim
    if x != 1:
        raise FieldConstructionError(f"0x{prim:X} is not primitive")
    for i in range(ORDER, 2 * ORDER):
        exp[i] = exp[i - ORDER]
    return exp, log


EXP, LOG = _build_tables(PRIM_POLY)

# numpy views of the same tables; LOG_NP[0] is a sentinel and must be masked
EXP_NP = np.array(EXP, dtype=np.int64)
LOG_NP = np.array(LOG, dtype=np.int64)
EXP_NP.setflags(write=False)
LOG_NP.setflags(write=False)

# zero-aware variants: log(0) maps to ZERO_LOG and any index sum that
# includes it (two logs at most) lands in the all-zero tail of EXPZ_NP
ZERO_LOG = 2 * ORDER
LOGZ_NP = LOG_NP.copy()
LOGZ_NP[0] = ZERO_LOG
EXPZ_NP = np.zeros(4 * ORDER + 1, dtype=np.int64)
EXPZ_NP[:2 * ORDER] = EXP_NP
LOGZ_NP.setflags(write=False)
EXPZ_NP.setflags(write=False)


def gf_mul(a, b):
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def gf_div(a, b):
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(2^16)")
    if a == 0:
        return 0
    return EXP[(LOG[a] - LOG[b]) % ORDER]


def gf_inv(a):
    if a == 0:
        raise ZeroDivisionError("zero has no inverse in GF(2^16)")
    return EXP[(ORDER - LOG[a]) % ORDER]


def gf_pow(a, e):
    if a == 0:
        return 1 if e == 0 else 0
    return EXP[(LOG[a] * e) % ORDER]


def alpha_pow(e):
    """Return alpha**e for any integer exponent (negative allowed)."""
    return EXP[e % ORDER]


def gf_mul_vec(a, b):
    """Element-wise product of two broadcastable integer arrays."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    nz = (a != 0) & (b != 0)
    out = EXP_NP[(LOG_NP[np.where(nz, a, 1)] + LOG_NP[np.where(nz, b, 1)])]
    return np.where(nz, out, 0)


def gf_scale_vec(c, v):
    """Multiply every element of ``v`` by the scalar ``c``."""
    v = np.asarray(v, dtype=np.int64)
    if c == 0:
        return np.zeros_like(v)
    nz = v != 0
    out = EXP_NP[LOG_NP[np.where(nz, v, 1)] + LOG[c]]
    return np.where(nz, out, 0)


def poly_eval(poly, x):
    """Horner evaluation; ``poly[0]`` is the highest-degree coefficient."""
    y = 0
    for c in poly:
        y = gf_mul(y, x) ^ c
    return y
