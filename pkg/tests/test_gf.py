import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hbmecc import gf
from oracles import ref_inv, ref_mul

sym = st.integers(0, 0xFFFF)
nonzero = st.integers(1, 0xFFFF)


def test_mul_examples():
    assert gf.gf_mul(0, 0x1234) == 0
    assert gf.gf_mul(1, 0xBEEF) == 0xBEEF
    # 0x8000 * x overflows into x^16 and is reduced by 0x1100B
    assert gf.gf_mul(2, 0x8000) == ref_mul(2, 0x8000) == 0x100B


@settings(max_examples=2000)
@given(sym, sym)
def test_mul_matches_carryless_oracle(a, b):
    assert gf.gf_mul(a, b) == ref_mul(a, b)


@given(sym, sym, sym)
def test_field_axioms(a, b, c):
    m = gf.gf_mul
    assert m(a, b) == m(b, a)
    assert m(m(a, b), c) == m(a, m(b, c))
    assert m(a, b ^ c) == m(a, b) ^ m(a, c)


@given(nonzero)
def test_inverse(a):
    inv = gf.gf_inv(a)
    assert gf.gf_mul(a, inv) == 1
    assert inv == ref_inv(a)
    assert gf.gf_mul(a, gf.gf_pow(a, (1 << 16) - 2)) == 1


@given(sym, nonzero)
def test_div_undoes_mul(a, b):
    assert gf.gf_div(gf.gf_mul(a, b), b) == a


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        gf.gf_inv(0)
    with pytest.raises(ZeroDivisionError):
        gf.gf_div(5, 0)


def test_alpha_generates_whole_group():
    assert len(set(gf.EXP[:gf.ORDER])) == gf.ORDER
    assert gf.alpha_pow(gf.ORDER) == 1
    assert gf.alpha_pow(-1) == gf.gf_inv(2)


def test_non_primitive_polynomial_rejected():
    # x^16 + 1 = (x + 1)^16 is reducible
    with pytest.raises(gf.FieldConstructionError):
        gf._build_tables(0x10001)


@given(st.lists(sym, min_size=1, max_size=40), st.lists(sym, min_size=1, max_size=40))
def test_vector_ops_match_scalar(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    assert gf.gf_mul_vec(a, b).tolist() == [gf.gf_mul(x, y) for x, y in zip(a, b)]
    assert gf.gf_scale_vec(b[0], a).tolist() == [gf.gf_mul(b[0], x) for x in a]


def test_poly_eval_horner():
    # p(x) = 3x^2 + x + 7 at x = 5
    expect = ref_mul(3, ref_mul(5, 5)) ^ 5 ^ 7
    assert gf.poly_eval([3, 1, 7], 5) == expect
