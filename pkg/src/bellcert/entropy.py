"""Entropy production: the running product V with the freeze rule, and the
certified bound delta on the maximum settings-conditional sequence probability.

The running product is kept as a compensated sum of ln T so that it neither
overflows nor underflows; for data sets with no violation it can fall far below
1e-300.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .core import abxy_to_code_table, as_codes
from .errors import InvalidParams, StreamTooShort

MAX_TRIALS = 2**53


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    m: float
    eps_p: float
    ln_vthresh: float

    @classmethod
    def from_vthresh(cls, n, m, eps_p, v_thresh) -> "ProtocolParams":
        return cls(n=int(n), m=float(m), eps_p=float(eps_p), ln_vthresh=math.log(v_thresh))

    @property
    def v_thresh(self) -> float:
        return math.exp(self.ln_vthresh)

    def ln_vthresh_max(self) -> float:
        """Largest admissible ln v_thresh: n ln(1 + 1.5 m) - ln eps_p."""
        return self.n * math.log1p(1.5 * self.m) - math.log(self.eps_p)


@dataclass(frozen=True)
class ProtocolResult:
    passed: bool
    crossing_index: int | None
    ln_v_final: float
    ln_v_max: float
    max_index: int
    trials_consumed: int


@dataclass(frozen=True)
class EntropyCertificate:
    delta_log2: float

    @property
    def delta(self) -> float:
        return 2.0**self.delta_log2

    @property
    def entropy_bits(self) -> float:
        return -self.delta_log2


def validate_params(params: ProtocolParams) -> list[str]:
    """Return a description of every violated condition (empty when valid)."""
    bad = []
    if not isinstance(params.n, (int, np.integer)) or params.n < 1:
        bad.append("n >= 1 (integer)")
    if not params.m > 0:
        bad.append("m > 0")
    if not 0 < params.eps_p < 1:
        bad.append("0 < eps_p < 1")
    if not params.ln_vthresh >= 0:
        bad.append("v_thresh >= 1")
    if not bad and params.ln_vthresh > params.ln_vthresh_max():
        bad.append("v_thresh <= (1 + 1.5 m)^n / eps_p")
    return bad


def compute_delta(params: ProtocolParams) -> EntropyCertificate:
    """log2 delta = n log2(1 + (1 - (eps_p v_thresh)^(1/n)) / (2m)).

    The nth root is within ~1e-7 of 1 at realistic sizes, so 1 - root is formed
    with expm1 and the outer logarithm with log1p.
    """
    bad = validate_params(params)
    if bad:
        raise InvalidParams("; ".join(bad))
    if params.n > MAX_TRIALS:
        raise InvalidParams(f"n = {params.n} exceeds 2^53")
    u = (math.log(params.eps_p) + params.ln_vthresh) / params.n
    inner = -math.expm1(u) / (2.0 * params.m)
    return EntropyCertificate(delta_log2=params.n * math.log1p(inner) / math.log(2.0))


def per_trial_bound(expectation: float, m: float) -> float:
    """Bound 1 + (1 - E(T)) / (2m) on the max conditional probability of one trial."""
    return 1.0 + (1.0 - expectation) / (2.0 * m)


def sequence_bound_log(expectations, m: float) -> float:
    """ln of [1 + (1 - (prod E_i)^(1/n)) / (2m)]^n for per-trial expectations E_i."""
    e = np.asarray(expectations, dtype=float)
    n = e.size
    root_minus_1 = math.expm1(float(np.sum(np.log(e))) / n)
    return n * math.log1p(-root_minus_1 / (2.0 * m))


@numba.njit(cache=True)
def _scan(codes, log_t, n, ln_vthresh):
    # Neumaier-compensated running sums: one frozen at the crossing, one not
    s = 0.0
    c = 0.0
    crossing = -1
    frozen = 0.0
    best = 0.0
    best_at = 0
    for i in range(n):
        v = log_t[codes[i]]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        cur = s + c
        if cur > best:
            best = cur
            best_at = i + 1
        if crossing < 0 and cur >= ln_vthresh:
            crossing = i + 1
            frozen = cur
    if crossing < 0:
        frozen = s + c
    return crossing, frozen, best, best_at


@numba.njit(cache=True)
def _running(codes, log_t):
    out = np.empty(codes.size)
    s = 0.0
    c = 0.0
    for i in range(codes.size):
        v = log_t[codes[i]]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out


def _log_code_table(t) -> np.ndarray:
    table = t.t if hasattr(t, "t") else np.asarray(t, dtype=float)
    if not (np.asarray(table) > 0).all():
        raise ValueError("Bell function entries must be positive")
    return np.ascontiguousarray(abxy_to_code_table(np.log(table)), dtype=np.float64)


def run_protocol(stream, t, params: ProtocolParams) -> ProtocolResult:
    """Accumulate ln T over the first n trials and apply the freeze rule.

    ``crossing_index`` is the 1-based trial count c at which ln V_c first
    reaches ln v_thresh; from there on T is treated as 1, so ``ln_v_final`` is
    ln V_c.  ``ln_v_max`` and ``max_index`` describe the maximum of the
    unfrozen running sum over all n trials (0 at index 0 if it never rises),
    which is reported for diagnostics only.
    """
    codes = as_codes(stream)
    n = int(params.n)
    if codes.size < n:
        raise StreamTooShort(f"stream has {codes.size} trials, protocol needs {n}")
    crossing, final, best, best_at = _scan(codes[:n], _log_code_table(t), n, float(params.ln_vthresh))
    return ProtocolResult(
        passed=crossing >= 0,
        crossing_index=int(crossing) if crossing >= 0 else None,
        ln_v_final=float(final),
        ln_v_max=float(best),
        max_index=int(best_at),
        trials_consumed=n,
    )


def log_v_trace(stream, t, stride: int = 1) -> np.ndarray:
    """Unfrozen running sum ln V_c for c = stride, 2*stride, ..."""
    codes = as_codes(stream)
    out = _running(codes, _log_code_table(t))
    return out[stride - 1::stride]
