import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellcert.errors import InvalidPrime, LengthMismatch
from bellcert.extractor import (E, ExtractorPlan, block_count, build_weak_design, extract, extract_reference,
                                field_degree, is_prime, max_output_bits, next_prime_above, one_bit_extract,
                                outcome_bits, plan, plan_for_protocol)
from bellcert.core import encode

from test_gf2 import oracle_mulmod

PRIMES = [p for p in range(5, 400) if all(p % k for k in range(2, int(p**0.5) + 1))]


def pairwise_weights(design):
    """sum_{j<i} 2^{|S_i & S_j|} with plain Python sets."""
    sets = [set(map(int, row)) for row in design.sets]
    return [sum(2 ** len(sets[i] & sets[j]) for j in range(i)) for i in range(len(sets))]


def check_design(design, t, w):
    assert design.sets.shape == (t, w)
    assert design.sets.min() >= 0 and design.sets.max() < design.d
    assert design.d == w * w * design.blocks
    for row in design.sets:
        assert len(set(map(int, row))) == w
        block = row // (w * w)
        assert (block == block[0]).all()
        local = row - block[0] * w * w
        assert np.array_equal(local // w, np.arange(w))  # one point per abscissa: a polynomial graph
    # every block holds a set once there are enough sets to go round
    used = set(np.unique(design.sets[:, 0] // (w * w)).tolist())
    assert len(used) == min(t, design.blocks)


# ---------------------------------------------------------------- plan


def test_published_seed_length():
    p = plan(264_322_430, 256, 1.76650e-5)
    assert (p.l, p.w, p.blocks, p.d) == (78, 157, 3, 73_947)


def test_field_degree_formula():
    for q, t, eps in [(264_322_430, 256, 1.7665e-5), (64, 4, 0.25), (12, 2, 0.5)]:
        assert field_degree(q, t, eps) == math.ceil(math.log2(4 * q * t * t / eps**2) - 1e-12)


def test_block_count():
    assert block_count(1, 157) == 2 and block_count(2, 7) == 2
    assert block_count(256, 157) == 3
    for t, w in [(300, 7), (5000, 11), (1000, 5)]:
        expect = max(2, 1 + math.ceil((math.log2(t - E) - math.log2(w - E)) / (math.log2(E) - math.log2(E - 1))))
        assert block_count(t, w) == expect


def test_primes():
    assert [p for p in range(60) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]
    assert next_prime_above(156) == 157 and next_prime_above(157) == 163
    assert is_prime(2**31 - 1) and not is_prime(2**32 + 1)


@given(st.floats(0, 5000), st.floats(1e-3, 1), st.floats(1e-12, 0.5))
def test_max_output_bits_is_largest_feasible(entropy, kappa, eps):
    t = max_output_bits(-entropy, kappa, eps)
    rhs = entropy + math.log2(kappa) + 5 * math.log2(eps) - 11
    if t == 0:
        assert rhs < 1
    else:
        assert t + 4 * math.log2(t) <= rhs
        assert (t + 1) + 4 * math.log2(t + 1) > rhs


@given(st.floats(0, 5000), st.floats(0, 500), st.floats(1e-3, 0.5), st.floats(1e-12, 0.25))
def test_max_output_bits_monotone(entropy, extra, kappa, eps):
    base = max_output_bits(-entropy, kappa, eps)
    assert max_output_bits(-(entropy + extra), kappa, eps) >= base
    assert max_output_bits(-entropy, min(1.0, 2 * kappa), eps) >= base
    assert max_output_bits(-entropy, kappa, 2 * eps) >= base


def test_published_output_length_is_supported():
    assert max_output_bits(-375.96920466665625, 0.33, 3.533e-5) >= 256


def test_plan_for_protocol_uses_outcome_bits_and_half_error():
    p = plan_for_protocol(1000, 8, 0.01, 0.5, -300.0)
    assert p.q == 2000 and p.eps == 0.005
    assert p.sigma == pytest.approx(300 - 1 + math.log2(0.5) + math.log2(0.01))


def test_entropy_sufficient():
    assert not ExtractorPlan(q=10, t=4, eps=0.1, sigma=None, l=1, w=3, blocks=2).entropy_sufficient()
    assert ExtractorPlan(q=10, t=4, eps=0.5, sigma=100.0, l=1, w=3, blocks=2).entropy_sufficient()


# ---------------------------------------------------------------- weak design


def test_single_set_design():
    d = build_weak_design(1, 7)
    assert d.sets.shape == (1, 7)
    assert d.overlap_weights().tolist() == [0.0]


def test_small_design_exhaustive():
    d = build_weak_design(3, 5)
    check_design(d, 3, 5)
    assert d.d == 50
    assert max(pairwise_weights(d)) <= 3


def test_published_design():
    d = build_weak_design(256, 157)
    check_design(d, 256, 157)
    assert d.d == 73_947
    w = pairwise_weights(d)
    assert max(w) <= 256
    assert np.array_equal(d.overlap_weights(), np.array(w, dtype=float))


def test_invalid_prime():
    with pytest.raises(InvalidPrime):
        build_weak_design(10, 9)


@pytest.mark.parametrize("seed", range(100))
def test_plan_and_design_agree(seed):
    rng = np.random.default_rng(seed)
    w = int(rng.choice(PRIMES))
    t = int(rng.integers(1, 3 * w))
    d = build_weak_design(t, w)
    assert d.blocks == block_count(t, w)
    assert d.d == w * w * block_count(t, w)
    check_design(d, t, w)
    assert d.overlap_weights().max() <= t - 1 + (t == 1)


@settings(max_examples=40)
@given(st.sampled_from([5, 7, 11, 13]), st.integers(1, 400))
def test_overlap_bound_against_naive_checker(w, t):
    d = build_weak_design(t, w)
    weights = pairwise_weights(d)
    assert max(weights) <= t
    assert np.array_equal(d.overlap_weights(), np.array(weights, dtype=float))


# ---------------------------------------------------------------- one-bit extractor


def test_zero_input_gives_zero():
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert one_bit_extract(np.zeros(40, dtype=np.uint8), rng.integers(0, 2, 16), 8) == 0


def test_constant_polynomial_is_inner_product():
    rng = np.random.default_rng(1)
    for _ in range(50):
        c0 = rng.integers(0, 2, 8)
        sub = rng.integers(0, 2, 17)
        assert one_bit_extract(c0, sub, 8) == int(np.dot(c0, sub[8:16]) % 2)


def test_gf16_oracle():
    # P(z) = c0 + c1 z over GF(16); coefficient bit j is the coefficient of x^j
    f = 0b10011
    for x in range(256):
        xb = [(x >> j) & 1 for j in range(8)]
        c0, c1 = x & 15, x >> 4
        for s in range(0, 256, 7):
            sb = [(s >> j) & 1 for j in range(8)]
            z, mask = s & 15, s >> 4
            value = c0 ^ oracle_mulmod(c1, z, f)
            assert one_bit_extract(xb, sb, 4) == bin(value & mask).count("1") % 2


def test_input_is_zero_padded():
    x = np.array([1, 0, 1, 1, 0, 1, 1], dtype=np.uint8)  # 7 bits, l = 4
    sub = np.array([1, 1, 0, 1, 0, 1, 1, 1], dtype=np.uint8)
    assert one_bit_extract(x, sub, 4) == one_bit_extract(np.r_[x, 0], sub, 4)


def test_surplus_subseed_bits_ignored():
    rng = np.random.default_rng(2)
    x = rng.integers(0, 2, 30)
    sub = rng.integers(0, 2, 13)
    base = one_bit_extract(x, sub, 5)
    sub[10:] ^= 1
    assert one_bit_extract(x, sub, 5) == base


def test_short_subseed():
    with pytest.raises(LengthMismatch):
        one_bit_extract([1, 0, 1], [1, 0, 1], 2)


# ---------------------------------------------------------------- composition


def _pattern_inputs(p):
    x = np.array([(i * 7 + 3) % 5 == 0 for i in range(64)], dtype=np.uint8)
    s = np.array([(i * i + i // 3) % 3 == 1 for i in range(p.d)], dtype=np.uint8)
    return x, s


def test_golden_vectors():
    p4 = plan(64, 4, 0.25)
    assert (p4.l, p4.w, p4.blocks, p4.d) == (16, 37, 2, 2738)
    x, s = _pattern_inputs(p4)
    d4 = build_weak_design(4, p4.w, p4.blocks)
    assert extract(x, s, p4, d4).tolist() == [1, 1, 1, 1]
    p16 = plan(64, 16, 0.25)
    x, s = _pattern_inputs(p16)
    d16 = build_weak_design(16, p16.w, p16.blocks)
    assert "".join(map(str, extract(x, s, p16, d16))) == "1010000111010001"
    x3 = np.array([(i * i) % 7 < 3 for i in range(64)], dtype=np.uint8)
    assert "".join(map(str, extract(x3, s, p16, d16))) == "1100101001100100"


def test_single_output_bit_is_one_bit_extractor():
    p = plan(64, 1, 0.25)
    d = build_weak_design(1, p.w, p.blocks)
    rng = np.random.default_rng(3)
    x, s = rng.integers(0, 2, 64), rng.integers(0, 2, p.d)
    assert extract(x, s, p, d)[0] == one_bit_extract(x, s[d.sets[0]], p.l)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 300), st.integers(1, 12), st.sampled_from([0.5, 0.1, 1e-3]))
def test_fast_path_matches_reference(seed, q, t, eps):
    rng = np.random.default_rng(seed)
    p = plan(q, t, eps)
    d = build_weak_design(t, p.w, p.blocks)
    x, s = rng.integers(0, 2, q).astype(np.uint8), rng.integers(0, 2, p.d).astype(np.uint8)
    assert np.array_equal(extract(x, s, p, d), extract_reference(x, s, d, p.l))


def test_wide_field_matches_reference():
    # l > 64 exercises the two-word representation
    rng = np.random.default_rng(4)
    p = plan(2000, 3, 1e-8)
    assert p.l > 64
    d = build_weak_design(3, p.w, p.blocks)
    x, s = rng.integers(0, 2, 2000).astype(np.uint8), rng.integers(0, 2, p.d).astype(np.uint8)
    assert np.array_equal(extract(x, s, p, d), extract_reference(x, s, d, p.l))


def test_seed_bits_outside_design_do_not_matter():
    p = plan(64, 8, 0.25)
    d = build_weak_design(8, p.w, p.blocks)
    rng = np.random.default_rng(5)
    x, s = rng.integers(0, 2, 64).astype(np.uint8), rng.integers(0, 2, p.d).astype(np.uint8)
    base = extract(x, s, p, d)
    outside = np.setdiff1d(np.arange(p.d), d.sets.reshape(-1))
    s2 = s.copy()
    s2[outside] = rng.permutation(s[outside]) ^ 1
    assert np.array_equal(extract(x, s2, p, d), base)


def test_deterministic_across_thread_caps(monkeypatch):
    p = plan(500, 16, 0.01)
    d = build_weak_design(16, p.w, p.blocks)
    rng = np.random.default_rng(6)
    x, s = rng.integers(0, 2, 500).astype(np.uint8), rng.integers(0, 2, p.d).astype(np.uint8)
    base = extract(x, s, p, d)
    monkeypatch.setenv("BELLCERT_THREADS", "1")
    assert np.array_equal(extract(x, s, p, d), base)
    assert np.array_equal(extract(x, s, p, d), base)


def test_length_checks():
    p = plan(64, 4, 0.25)
    d = build_weak_design(4, p.w, p.blocks)
    with pytest.raises(LengthMismatch):
        extract(np.zeros(63, dtype=np.uint8), np.zeros(p.d, dtype=np.uint8), p, d)
    with pytest.raises(LengthMismatch):
        extract(np.zeros(64, dtype=np.uint8), np.zeros(p.d - 1, dtype=np.uint8), p, d)
    with pytest.raises(LengthMismatch):
        extract(np.zeros(64, dtype=np.uint8), np.zeros(p.d, dtype=np.uint8), p, build_weak_design(3, p.w))


def test_outcome_bit_order():
    codes = encode([0, 1, 0], [1, 0, 0], [1, 0, 1], [0, 0, 1])
    assert outcome_bits(codes).tolist() == [1, 0, 0, 0, 1, 1]
