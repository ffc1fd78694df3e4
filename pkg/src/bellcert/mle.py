"""Maximum-likelihood non-signaling distribution with uniform settings.

The non-signaling polytope with uniform settings is the convex hull of the 24
vertices (16 LR + 8 PR), so the fit is a concave maximization over mixture
weights on the probability simplex.  We run exponentiated-gradient ascent with
a backtracking step, then polish with Newton steps restricted to the polytope's
8-dimensional affine hull.  The polish matters: cell probabilities span five
orders of magnitude, and first-order steps stall long before the small cells
are resolved to 1e-9.

Objective differences are always evaluated as sum f * log1p(dq / q); comparing
raw objective values loses the improvements to rounding near the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CountsTable, JointDistribution, vertex_matrix
from .errors import EmptySettingCell, NotConverged


@dataclass(frozen=True)
class MleConfig:
    objective_tol: float = 1e-13
    feasibility_tol: float = 1e-9
    max_iters: int = 1_000_000
    patience: int = 10

    def __post_init__(self):
        if self.objective_tol <= 0 or self.feasibility_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class MleResult:
    q: JointDistribution
    log_likelihood: float
    iterations: int
    converged: bool
    newton_steps: int = 0
    trace: np.ndarray | None = None


def log_likelihood(freq, q) -> float:
    """sum_{abxy} f(ab|xy) ln q(a,b,x,y); cells with f = 0 contribute nothing."""
    f = np.asarray(freq, dtype=float).reshape(-1)
    q = np.asarray(q.p if isinstance(q, JointDistribution) else q, dtype=float).reshape(-1)
    mask = f > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(f[mask] * np.log(q[mask])))


def affine_constraints():
    """(A, b) with A q = b describing uniform settings plus non-signaling.

    q is flattened from ``[a, b, x, y]``.  Four rows fix p(x,y) = 1/4, two rows
    equate p(a=1|x,y=0) and p(a=1|x,y=1), two rows do the same for Bob.
    """
    A = np.zeros((8, 2, 2, 2, 2))
    row = 0
    for x in (0, 1):
        for y in (0, 1):
            A[row, :, :, x, y] = 1.0
            row += 1
    for x in (0, 1):
        A[row, 1, :, x, 0] += 1.0
        A[row, 1, :, x, 1] -= 1.0
        row += 1
    for y in (0, 1):
        A[row, :, 1, 0, y] += 1.0
        A[row, :, 1, 1, y] -= 1.0
        row += 1
    b = np.r_[np.full(4, 0.25), np.zeros(4)]
    return A.reshape(8, 16), b


def _gain(w, q, dq):
    """Exact-ish increase of sum w ln q when q moves by dq."""
    with np.errstate(invalid="ignore", divide="ignore"):
        return float(w @ np.log1p(dq / q))


def _eg_phase(f, cfg, lam, trace):
    V = vertex_matrix()
    mask = f > 0
    fm, Vm = f[mask], V[:, mask]
    q = lam @ V
    val = float(fm @ np.log(q[mask]))
    if trace is not None:
        trace.append(val)
    eta, quiet, it = 1.0, 0, 0
    while it < cfg.max_iters:
        it += 1
        g = Vm @ (fm / q[mask])
        while True:
            z = eta * (g - g.max())
            cand = lam * np.exp(z)
            cand /= cand.sum()
            cq = cand @ V
            gain = _gain(fm, q[mask], cq[mask] - q[mask])
            if gain >= 0:
                break
            eta *= 0.5
            if eta < 1e-30:
                cand, cq, gain = lam, q, 0.0
                break
        lam, q = cand, cq
        val += gain
        if trace is not None:
            trace.append(val)
        eta = min(eta * 2.0, 1e12)
        quiet = quiet + 1 if gain / max(abs(val), 1e-300) < cfg.objective_tol else 0
        if quiet >= cfg.patience:
            return lam, q, val, it, True
    return lam, q, val, it, False


def _newton_phase(f, q, val, trace, max_steps=50, barrier=1e-13):
    """Equality-constrained Newton ascent on the affine hull, keeping q > 0.

    Cells with f = 0 get a tiny log-barrier weight so the Hessian stays definite.
    """
    A, _ = affine_constraints()
    w = np.where(f > 0, f, barrier)
    if (q <= 0).any():
        # an exact zero in an f = 0 cell; step toward the polytope centroid, which stays feasible
        q = q + 1e-14 * (vertex_matrix().mean(axis=0) - q)
    steps, stalled = 0, 0
    for _ in range(max_steps):
        g = w / q
        dinv = q * q / w
        M = (A * dinv) @ A.T
        nu = np.linalg.lstsq(M, A @ (dinv * g), rcond=None)[0]
        d = dinv * (g - A.T @ nu)
        decrement = float(d @ (w * d / (q * q)))
        if decrement < 1e-15:  # decrement/2 bounds the remaining gain; rounding floor is ~2e-16
            break
        s = 1.0
        while (q + s * d <= 0).any():
            s *= 0.5
        while s > 1e-20:
            gain_full = _gain(w, q, s * d)
            gain_f = _gain(f[f > 0], q[f > 0], s * d[f > 0])
            if gain_full >= 0 and gain_f >= -1e-15:
                break
            s *= 0.5
        else:
            break
        q = q + s * d
        val += gain_f
        steps += 1
        if trace is not None:
            trace.append(val)
        # only the barrier cells still move once the likelihood gain is at the rounding floor
        stalled = stalled + 1 if abs(gain_f) < 1e-15 else 0
        if stalled >= 3:
            break
    return q, val, steps


def fit_frequencies(freq, cfg: MleConfig = MleConfig(), start=None, keep_trace=False) -> MleResult:
    """Fit a conditional frequency table f(ab|xy) (any shape with 16 entries)."""
    f = np.asarray(freq, dtype=float).reshape(16)
    if (f < 0).any():
        raise ValueError("frequencies must be nonnegative")
    lam = np.full(24, 1 / 24) if start is None else np.asarray(start, dtype=float) / np.sum(start)
    trace = [] if keep_trace else None
    lam, q, val, iters, converged = _eg_phase(f, cfg, lam, trace)
    q, val, steps = _newton_phase(f, q, val, trace)
    q = np.clip(q, 0.0, None)
    return MleResult(
        q=JointDistribution((q / q.sum()).reshape(2, 2, 2, 2)),
        log_likelihood=log_likelihood(f, q),
        iterations=iters,
        converged=converged,
        newton_steps=steps,
        trace=np.array(trace) if keep_trace else None,
    )


def fit_nonsignaling(counts: CountsTable, cfg: MleConfig = MleConfig(), **kw) -> MleResult:
    """Maximum-likelihood non-signaling, uniform-settings fit to observed counts."""
    if (counts.setting_totals() == 0).any():
        raise EmptySettingCell("every settings pair needs at least one trial")
    res = fit_frequencies(counts.conditional_frequencies(), cfg, **kw)
    if not res.converged:
        raise NotConverged(f"no convergence after {res.iterations} iterations")
    return res
