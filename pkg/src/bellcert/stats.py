"""Diagnostics on trial streams: settings bias, settings independence, and the
four non-signaling equalities, all as asymptotically normal z statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import JointDistribution, counts_from_stream
from .errors import DegenerateMargin, EmptySettingCell


@dataclass(frozen=True)
class TestReport:
    name: str
    statistic: float
    p_value: float
    n_effective: int

    __test__ = False  # not a pytest class


def two_sided_p(z: float) -> float:
    return float(2.0 * ndtr(-abs(z)))


def _report(name, z, n) -> TestReport:
    return TestReport(name=name, statistic=float(z), p_value=two_sided_p(z), n_effective=int(n))


def _setting_counts(stream) -> np.ndarray:
    """N[x, y] from a stream or a CountsTable."""
    c = stream if hasattr(stream, "counts") else counts_from_stream(stream)
    return np.asarray(c.counts).sum(axis=(0, 1))


def settings_bias_test(stream, station: str) -> TestReport:
    """z = (N_1 - N/2) / (sqrt(N) / 2) for the chosen station's setting."""
    nxy = _setting_counts(stream)
    n = int(nxy.sum())
    if n == 0:
        raise ValueError("empty stream")
    if station in ("alice", "A", "x"):
        n1 = int(nxy[1, :].sum())
    elif station in ("bob", "B", "y"):
        n1 = int(nxy[:, 1].sum())
    else:
        raise ValueError(f"unknown station {station!r}")
    z = (n1 - n / 2) / (math.sqrt(n) / 2)
    return _report(f"bias_{'x' if station in ('alice', 'A', 'x') else 'y'}", z, n)


def settings_independence_test(stream) -> TestReport:
    """Correlation z-test of X and Y: (N11 - N px py) / sqrt(N px (1-px) py (1-py))."""
    nxy = _setting_counts(stream)
    n = int(nxy.sum())
    if n == 0:
        raise ValueError("empty stream")
    px = nxy[1, :].sum() / n
    py = nxy[:, 1].sum() / n
    if px in (0.0, 1.0) or py in (0.0, 1.0):
        raise DegenerateMargin("a station's settings are constant")
    z = (nxy[1, 1] - n * px * py) / math.sqrt(n * px * (1 - px) * py * (1 - py))
    return _report("independence", z, n)


def _two_proportion(k1, n1, k2, n2) -> float:
    pooled = (k1 + k2) / (n1 + n2)
    var = pooled * (1 - pooled) * (1 / n1 + 1 / n2)
    if var == 0:
        return 0.0  # identical degenerate rates on both sides
    return (k1 / n1 - k2 / n2) / math.sqrt(var)


def signaling_tests(stream) -> list[TestReport]:
    """Two-proportion z-tests of P(A=1|x,y=0) = P(A=1|x,y=1) for x = 0, 1 and the
    Bob analogues P(B=1|x=0,y) = P(B=1|x=1,y) for y = 0, 1."""
    c = stream if hasattr(stream, "counts") else counts_from_stream(stream)
    counts = np.asarray(c.counts)
    nxy = counts.sum(axis=(0, 1))
    if (nxy == 0).any():
        raise EmptySettingCell("every settings pair needs at least one trial")
    a1 = counts[1].sum(axis=0)  # [x, y] trials with a = 1
    b1 = counts[:, 1].sum(axis=0)
    out = []
    for x in (0, 1):
        z = _two_proportion(a1[x, 0], nxy[x, 0], a1[x, 1], nxy[x, 1])
        out.append(_report(f"alice_x{x}", z, nxy[x, 0] + nxy[x, 1]))
    for y in (0, 1):
        z = _two_proportion(b1[0, y], nxy[0, y], b1[1, y], nxy[1, y])
        out.append(_report(f"bob_y{y}", z, nxy[0, y] + nxy[1, y]))
    return out


def renormalize_uniform(freq: JointDistribution) -> JointDistribution:
    """F'(a,b,x,y) = F(a,b,x,y) / (4 F(x,y)): same conditionals, uniform settings."""
    p = freq.p
    pxy = p.sum(axis=(0, 1))
    if (pxy <= 0).any():
        raise EmptySettingCell("every settings pair needs positive frequency")
    return JointDistribution(p / (4.0 * pxy))


def all_reports(stream) -> list[TestReport]:
    c = counts_from_stream(stream) if not hasattr(stream, "counts") else stream
    return [
        settings_bias_test(c, "alice"),
        settings_bias_test(c, "bob"),
        settings_independence_test(c),
        *signaling_tests(c),
    ]
