import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellcert.core import abxy_to_code_table, lr_vertices
from bellcert.data import (XOR3_EPS_EXT, XOR3_EPS_P, XOR3_KAPPA, XOR3_M, XOR3_N, XOR3_VMAX, XOR3_VTHRESH,
                           xor3_bell_function, xor3_ns_fit)
from bellcert.entropy import (ProtocolParams, compute_delta, log_v_trace, per_trial_bound, run_protocol,
                              sequence_bound_log, validate_params)
from bellcert.errors import InvalidParams, StreamTooShort
from bellcert.extractor import max_output_bits
from bellcert.pbr import compute_m
from bellcert.simulate import sample_stream

from conftest import random_ns


def delta_log2_oracle(n, m, eps_p, v_thresh, digits=60):
    with mpmath.workdps(digits):
        n, m, eps_p, v = (mpmath.mpf(str(z)) for z in (n, m, eps_p, v_thresh))
        root = mpmath.power(eps_p * v, 1 / n)
        return float(n * mpmath.log(1 + (1 - root) / (2 * m), 2))


XOR3 = ProtocolParams.from_vthresh(XOR3_N, XOR3_M, XOR3_EPS_P, XOR3_VTHRESH)


def test_published_certificate_against_oracle():
    cert = compute_delta(XOR3)
    oracle = delta_log2_oracle(XOR3_N, XOR3_M, XOR3_EPS_P, XOR3_VTHRESH)
    assert cert.delta_log2 == pytest.approx(oracle, rel=1e-12)
    assert cert.entropy_bits == pytest.approx(375.9, abs=0.5)
    assert cert.entropy_bits == pytest.approx(375.96920466665625, rel=1e-12)
    assert max_output_bits(cert.delta_log2, XOR3_KAPPA, XOR3_EPS_EXT) >= 256


def test_certificate_at_largest_running_product():
    cert = compute_delta(ProtocolParams.from_vthresh(XOR3_N, XOR3_M, XOR3_EPS_P, XOR3_VMAX))
    assert cert.entropy_bits == pytest.approx(delta_log2_oracle(XOR3_N, XOR3_M, XOR3_EPS_P, XOR3_VMAX) * -1,
                                              rel=1e-12)
    assert cert.entropy_bits > compute_delta(XOR3).entropy_bits


@settings(max_examples=200)
@given(n=st.integers(1, 10**12), m=st.floats(1e-4, 0.5), log_eps=st.floats(-30, -0.01), frac=st.floats(0, 1))
def test_certificate_matches_oracle_and_lower_bound(n, m, log_eps, frac):
    eps_p = math.exp(log_eps)
    p = ProtocolParams(n=n, m=m, eps_p=eps_p, ln_vthresh=0.0)
    p = ProtocolParams(n=n, m=m, eps_p=eps_p, ln_vthresh=frac * p.ln_vthresh_max())
    if validate_params(p):
        return
    cert = compute_delta(p)
    assert cert.delta_log2 >= -2 * n * (1 + 1e-12)  # delta >= 2^-2n
    oracle = delta_log2_oracle(n, m, eps_p, math.exp(p.ln_vthresh)) if p.ln_vthresh < 700 else None
    if oracle is not None and oracle != 0:
        assert cert.delta_log2 == pytest.approx(oracle, rel=1e-9, abs=1e-300)


def test_validate_params_examples():
    assert validate_params(ProtocolParams(n=100, m=0.01, eps_p=0.1, ln_vthresh=0.0)) == []
    p = ProtocolParams(n=100, m=0.01, eps_p=0.1, ln_vthresh=0.0)
    over = ProtocolParams(n=100, m=0.01, eps_p=0.1, ln_vthresh=p.ln_vthresh_max() + 0.1)
    assert any("(1 + 1.5 m)^n" in msg for msg in validate_params(over))
    assert validate_params(XOR3) == []
    bad = validate_params(ProtocolParams(n=0, m=-1.0, eps_p=2.0, ln_vthresh=-1.0))
    assert len(bad) == 4


def test_compute_delta_rejects_invalid():
    with pytest.raises(InvalidParams):
        compute_delta(ProtocolParams(n=10, m=0.0, eps_p=0.1, ln_vthresh=0.0))
    with pytest.raises(InvalidParams):
        compute_delta(ProtocolParams(n=2**53 + 1, m=0.1, eps_p=0.1, ln_vthresh=0.0))


def test_all_ones_stream_passes_at_threshold_one():
    t = xor3_bell_function()
    codes = np.zeros(50, dtype=np.uint8)  # only (0, 0) outcomes, T = 1
    res = run_protocol(codes, t, ProtocolParams(n=50, m=XOR3_M, eps_p=0.1, ln_vthresh=0.0))
    assert res.passed and res.crossing_index == 1 and res.ln_v_final == 0.0


def test_stream_too_short():
    with pytest.raises(StreamTooShort):
        run_protocol(np.zeros(5, dtype=np.uint8), xor3_bell_function(), XOR3)


def _direct(codes, t):
    lt = abxy_to_code_table(t.t)
    v, out = 1.0, []
    for c in codes:
        v *= lt[c]
        out.append(v)
    return np.array(out)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10_000), st.floats(0.0, 3.0))
def test_freeze_rule_matches_direct_product(seed, n, ln_v):
    rng = np.random.default_rng(seed)
    t = xor3_bell_function()
    codes = rng.integers(0, 16, size=n).astype(np.uint8)
    direct = _direct(codes, t)
    res = run_protocol(codes, t, ProtocolParams(n=n, m=XOR3_M, eps_p=1e-3, ln_vthresh=ln_v))
    hits = np.flatnonzero(np.log(direct) >= ln_v)
    if hits.size and abs(np.log(direct[hits[0]]) - ln_v) > 1e-9:
        assert res.passed and res.crossing_index == hits[0] + 1
        assert math.exp(res.ln_v_final) == pytest.approx(direct[hits[0]], rel=1e-9)
        assert res.ln_v_final >= ln_v
    elif not hits.size and np.log(direct).max() < ln_v - 1e-9:
        assert not res.passed and res.crossing_index is None
        assert math.exp(res.ln_v_final) == pytest.approx(direct[-1], rel=1e-9)
    assert math.exp(res.ln_v_max) == pytest.approx(max(1.0, direct.max()), rel=1e-9)
    trace = log_v_trace(codes, t)
    assert np.allclose(np.exp(trace), direct, rtol=1e-9)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_freeze_rule_monotone_in_threshold(seed, lo, extra):
    rng = np.random.default_rng(seed)
    t = xor3_bell_function()
    codes = rng.choice(16, size=3000, p=abxy_to_code_table(random_ns(rng).p)).astype(np.uint8)
    hi = lo + extra
    r_lo = run_protocol(codes, t, ProtocolParams(n=3000, m=XOR3_M, eps_p=1e-3, ln_vthresh=lo))
    r_hi = run_protocol(codes, t, ProtocolParams(n=3000, m=XOR3_M, eps_p=1e-3, ln_vthresh=hi))
    if r_hi.passed:
        assert r_lo.passed and r_lo.crossing_index <= r_hi.crossing_index
    unfrozen = log_v_trace(codes, t)[-1]
    assert r_hi.ln_v_final >= min(hi, unfrozen) - 1e-12


def test_tiny_products_do_not_underflow():
    t = xor3_bell_function()
    worst = int(np.argmin(abxy_to_code_table(t.t)))
    codes = np.full(200_000, worst, dtype=np.uint8)
    res = run_protocol(codes, t, ProtocolParams(n=codes.size, m=XOR3_M, eps_p=1e-3, ln_vthresh=1.0))
    assert res.ln_v_final == pytest.approx(codes.size * math.log(abxy_to_code_table(t.t)[worst]), rel=1e-12)
    assert res.ln_v_final < math.log(1e-300)


def test_trials_past_n_are_ignored():
    t = xor3_bell_function()
    best = int(np.argmax(abxy_to_code_table(t.t)))
    codes = np.r_[np.zeros(100, dtype=np.uint8), np.full(100, best, dtype=np.uint8)]
    res = run_protocol(codes, t, ProtocolParams(n=100, m=XOR3_M, eps_p=1e-3, ln_vthresh=0.01))
    assert not res.passed and res.trials_consumed == 100 and res.ln_v_max == 0.0


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(1, 50))
def test_chaining_bound_dominates_per_trial_product(seed, n):
    rng = np.random.default_rng(seed)
    t = xor3_bell_function()
    m = compute_m(t).m
    es = np.array([t.expectation(random_ns(rng)) for _ in range(n)])
    per_trial = np.sum(np.log([per_trial_bound(e, m) for e in es]))
    assert sequence_bound_log(es, m) >= per_trial - 1e-12


def test_published_stream_threshold_behaviour():
    # 1e6 trials cannot reach the published threshold; the product is tracked without overflow
    t = xor3_bell_function()
    codes = sample_stream(xor3_ns_fit(), 1_000_000, 2)
    res = run_protocol(codes, t, ProtocolParams(n=1_000_000, m=XOR3_M, eps_p=XOR3_EPS_P,
                                                ln_vthresh=math.log(XOR3_VTHRESH)))
    assert not res.passed and res.ln_v_final < math.log(XOR3_VTHRESH)


def test_lr_stream_never_passes():
    t = xor3_bell_function()
    for k, v in enumerate(lr_vertices()):
        codes = sample_stream(v, 20_000, k)
        res = run_protocol(codes, t, ProtocolParams(n=20_000, m=XOR3_M, eps_p=1e-3, ln_vthresh=10.0))
        assert not res.passed
