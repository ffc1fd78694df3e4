"""Comparison with a min-entropy estimate based on CHSH violation: the CHSH score
table, the guessing-probability bound g, decomposition of a non-signaling
distribution into one PR box plus LR vertices, and the trial-count bound that
such an estimate needs before it certifies anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, nnls

from .core import SHAPE, JointDistribution, lr_vertices, pr_boxes
from .errors import Infeasible
from .mle import affine_constraints

CHSH_LR_MAX = 0.75


def chsh_function() -> np.ndarray:
    """T^c[a, b, x, y] = 1 when a = b for xy != 11, or a != b for xy = 11; else 0."""
    t = np.zeros(SHAPE)
    for a in (0, 1):
        for b in (0, 1):
            for x in (0, 1):
                for y in (0, 1):
                    t[a, b, x, y] = float((a ^ b) == (x & y))
    return t


def chsh_rescaled() -> tuple[np.ndarray, float]:
    """(I, i_ns): CHSH scaled so the LR maximum is 1; the PR box then scores 4/3."""
    return chsh_function() / CHSH_LR_MAX, 1.0 / CHSH_LR_MAX


def g_bound(x: float, i_ns: float) -> float:
    """1 + (1 - x) / (2 (i_ns - 1)), clamped to [1/4, 1]."""
    if i_ns <= 1:
        raise ValueError("i_ns must exceed 1")
    return float(min(1.0, max(0.25, 1.0 + (1.0 - x) / (2.0 * (i_ns - 1.0)))))


@dataclass(frozen=True)
class PmBoundInputs:
    p: float
    eps: float
    i_ns: float | None = None
    j_m: float | None = None

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if (self.i_ns is None) != (self.j_m is None):
            raise ValueError("give both i_ns and j_m, or neither")


def pm_min_trials(inputs: PmBoundInputs) -> float:
    """8 ln(1/eps) / p^2, or 8 ln(1/eps) i_ns^2 / (j_m - 1)^2 when i_ns, j_m are given."""
    log_term = 8.0 * math.log(1.0 / inputs.eps)
    if inputs.i_ns is None:
        return log_term / inputs.p**2
    return log_term * inputs.i_ns**2 / (inputs.j_m - 1.0) ** 2


@dataclass(frozen=True)
class PrDecomposition:
    p: float
    pr_index: int
    lr_weights: np.ndarray
    projection_distance: float = 0.0  # max entry shift when projecting the input onto the NS hull

    def reconstruct(self) -> np.ndarray:
        lr = np.stack([v.p for v in lr_vertices()])
        return self.p * pr_boxes()[self.pr_index].p + np.tensordot(self.lr_weights, lr, axes=1)


def _min_pr_weight(d: np.ndarray, pr: np.ndarray, lr: np.ndarray, tol: float):
    """min p over p PR + sum_j lam_j LR_j = d (entrywise within tol), p, lam >= 0."""
    A = np.column_stack([pr, lr.T])  # 16 x 17
    c = np.r_[1.0, np.zeros(16)]
    res = linprog(c, A_ub=np.vstack([A, -A]), b_ub=np.r_[d + tol, -(d - tol)],
                  bounds=[(0, None)] * 17, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        return None
    x = res.x
    # re-solve the equalities exactly on the LP's support (p included when positive); weights the
    # re-solve leaves below 1e-12 are rounding, so drop them and solve again
    cols = np.flatnonzero(x > 1e-12)
    while cols.size:
        sol, *_ = np.linalg.lstsq(A[:, cols], d, rcond=None)
        if (sol < 0).any():
            sol, _ = nnls(A[:, cols], d)
        if np.abs(A[:, cols] @ sol - d).max() > np.abs(A @ x - d).max():
            break
        x = np.zeros_like(x)
        x[cols] = sol
        keep = sol > 1e-12
        if keep.all():
            break
        cols = cols[keep]
    return x


def project_nonsignaling(d: JointDistribution) -> np.ndarray:
    """Orthogonal projection of d (flattened) onto the uniform-settings NS affine hull."""
    A, b = affine_constraints()
    q = d.p.reshape(16)
    return q - A.T @ np.linalg.solve(A @ A.T, A @ q - b)


def pr_weight(d: JointDistribution, tol: float = 1e-10, max_shift: float = 1e-8) -> PrDecomposition:
    """Smallest-weight decomposition of d into one PR box and the 16 LR vertices.

    The input is first projected onto the non-signaling affine hull, which
    absorbs rounding in published tables; shifts above ``max_shift`` are
    rejected.  Each PR box is tried in index order; the smallest p wins, ties
    (within 1e-12) going to the lower index.  LR weights are rescaled to sum to
    exactly 1 - p after solving.
    """
    target = project_nonsignaling(d)
    shift = float(np.abs(target - d.p.reshape(16)).max())
    if shift > max_shift:
        raise Infeasible(f"distribution signals: projection moves an entry by {shift:.3g}")
    lr = np.stack([v.p.reshape(16) for v in lr_vertices()])
    best = None
    for k, box in enumerate(pr_boxes()):
        x = _min_pr_weight(target, box.p.reshape(16), lr, tol)
        if x is None:
            continue
        if best is None or x[0] < best[1][0] - 1e-12:
            best = (k, x)
    if best is None:
        raise Infeasible("distribution lies outside the non-signaling polytope")
    k, x = best
    p = float(max(x[0], 0.0))
    lam = np.clip(x[1:], 0.0, None)
    if lam.sum() > 0:
        lam *= (1.0 - p) / lam.sum()
    dec = PrDecomposition(p=p, pr_index=k, lr_weights=lam, projection_distance=shift)
    resid = np.abs(dec.reconstruct().reshape(16) - target).max()
    if resid > 1e-9:
        raise Infeasible(f"best decomposition misses the input by {resid:.3g}")
    return dec
