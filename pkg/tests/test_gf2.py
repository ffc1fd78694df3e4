import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bellcert.gf2 import GF2Field, clmul, exponents, irreducible_poly, is_irreducible, mulmod, poly_mod


def _coeffs(v: int) -> np.ndarray:
    """Highest-degree-first integer coefficients, the np.polydiv convention."""
    return np.array([int(b) for b in bin(v)[2:]]) if v else np.array([0])


def _value(c) -> int:
    c = np.mod(np.rint(np.atleast_1d(c)).astype(np.int64), 2)
    return int("".join(map(str, c)), 2) if c.size else 0


def oracle_mulmod(a: int, b: int, f: int) -> int:
    """Multiply and reduce with integer polynomial arithmetic taken mod 2."""
    prod = np.mod(np.polymul(_coeffs(a), _coeffs(b)), 2)
    rem = prod.astype(float)
    fc = _coeffs(f).astype(float)
    # long division over GF(2): the leading coefficient of f is 1, so integer division stays exact
    while rem.size >= fc.size:
        if int(rem[0]) % 2:
            rem[:fc.size] = np.mod(rem[:fc.size] - fc, 2)
        rem = rem[1:]
    return _value(rem)


def brute_irreducible(f: int) -> bool:
    deg = f.bit_length() - 1
    for g in range(2, 1 << (deg // 2 + 1)):
        if g.bit_length() - 1 > deg // 2:
            break
        if poly_mod(f, g) == 0:
            return False
    return True


def test_clmul_small():
    assert clmul(0b11, 0b11) == 0b101
    assert clmul(0b1011, 0) == 0
    assert clmul(0b1011, 1) == 0b1011


@given(st.integers(0, 2**40), st.integers(0, 2**40))
def test_clmul_matches_oracle(a, b):
    assert clmul(a, b) == _value(np.mod(np.polymul(_coeffs(a), _coeffs(b)), 2))


@pytest.mark.parametrize("l,expected", [(8, (8, 4, 3, 1, 0)), (32, (32, 7, 3, 2, 0)), (64, (64, 4, 3, 1, 0)),
                                        (78, (78, 6, 5, 3, 0)), (128, (128, 7, 2, 1, 0)), (4, (4, 1, 0)),
                                        (3, (3, 1, 0))])
def test_fixed_moduli(l, expected):
    assert exponents(irreducible_poly(l)) == expected


def test_moduli_are_irreducible_and_lowest_weight_for_small_degrees():
    for l in range(2, 15):
        f = irreducible_poly(l)
        assert brute_irreducible(f)
        weight = len(exponents(f))
        if weight == 5:  # no irreducible trinomial exists at this degree
            assert not any(brute_irreducible((1 << l) | (1 << k) | 1) for k in range(1, l))
        else:
            assert weight == 3
            k = exponents(f)[1]
            assert not any(brute_irreducible((1 << l) | (1 << j) | 1) for j in range(1, k))


@given(st.integers(2, 1 << 12))
def test_rabin_matches_trial_division(f):
    assert is_irreducible(f) == brute_irreducible(f) or f.bit_length() < 2


def test_unsupported_degree():
    with pytest.raises(ValueError):
        irreducible_poly(129)


def test_gf16_tables_against_oracle():
    f = 0b10011  # x^4 + x + 1
    assert irreducible_poly(4) == f
    field = GF2Field(4)
    for a in range(16):
        for b in range(16):
            assert field.mul(a, b) == oracle_mulmod(a, b, f)


@given(st.integers(1, 128), st.data())
def test_field_axioms(l, data):
    field = GF2Field(l)
    a, b, c = (data.draw(st.integers(0, (1 << l) - 1)) for _ in range(3))
    assert field.mul(a, b) == field.mul(b, a)
    assert field.mul(a, field.mul(b, c)) == field.mul(field.mul(a, b), c)
    assert field.mul(a, b ^ c) == field.mul(a, b) ^ field.mul(a, c)
    assert field.mul(a, b) < (1 << l)
    if a:
        assert field.mul(a, field.inv(a)) == 1


@given(st.integers(1, 78), st.data())
def test_mulmod_matches_oracle(l, data):
    f = irreducible_poly(l)
    a, b = (data.draw(st.integers(0, (1 << l) - 1)) for _ in range(2))
    assert mulmod(a, b, f) == oracle_mulmod(a, b, f)


def test_eval_poly_horner():
    field = GF2Field(8)
    coeffs = [3, 0, 7, 1]
    z = 0x53
    direct = 0
    for i, c in enumerate(coeffs):
        direct ^= field.mul(c, field.pow(z, i))
    assert field.eval_poly(coeffs, z) == direct
