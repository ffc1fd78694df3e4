"""Bell functions by the prediction-based-ratio method.

``optimize_bell_function`` maximizes E(ln T) under an estimated distribution
subject to E(T) <= 1 at every deterministic LR vertex, with T(0,0,x,y) = 1.
The problem is tiny (12 free entries, 15 nontrivial linear constraints), so a
log-barrier interior-point method with Newton steps is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import SHAPE, JointDistribution, _from_grid, _to_grid, lr_vertices, ns_vertices
from .errors import DegenerateInput, NoViolationPossible, NotConverged
from .mle import MleConfig

LOG2E = 1.0 / np.log(2.0)


@dataclass(frozen=True)
class BellFunction:
    t: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float).reshape(SHAPE)
        if not (t > 0).all():
            raise ValueError("Bell function entries must be positive")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    @classmethod
    def from_grid(cls, rows) -> "BellFunction":
        return cls(_from_grid(rows))

    @classmethod
    def ones(cls) -> "BellFunction":
        return cls(np.ones(SHAPE))

    def grid(self) -> np.ndarray:
        return _to_grid(self.t)

    def expectation(self, d: JointDistribution) -> float:
        return float(np.sum(d.p * self.t))

    def log_expectation(self, d: JointDistribution) -> float:
        """E(ln T) under d."""
        return float(np.sum(d.p * np.log(self.t)))

    def lr_expectations(self) -> np.ndarray:
        return np.array([self.expectation(v) for v in lr_vertices()])

    def log_table(self) -> np.ndarray:
        return np.log(self.t)


@dataclass(frozen=True)
class BellBound:
    m: float
    achieving_vertex: int
    vertex_values: np.ndarray


@dataclass(frozen=True)
class ThresholdPlan:
    ln_vthresh: float
    mu: float
    sigma2: float
    quantile: float
    n: int
    z: float

    @property
    def v_thresh(self) -> float:
        """exp(ln_vthresh); inf when it exceeds the float range."""
        try:
            return math.exp(self.ln_vthresh)
        except OverflowError:
            return math.inf


def _lr_rows():
    return np.stack([v.p.reshape(16) for v in lr_vertices()])


def optimize_bell_function(q: JointDistribution, cfg: MleConfig = MleConfig(), free_00: bool = False,
                           return_info: bool = False):
    """Maximize E(ln T)_q subject to E(T) <= 1 at each LR vertex.

    With ``free_00`` False the four entries T(0,0,x,y) are pinned to 1.
    """
    qf = q.p.reshape(16)
    fixed = np.zeros(16, dtype=bool)
    if not free_00:
        fixed.reshape(SHAPE)[0, 0, :, :] = True
    free = ~fixed
    if qf[free].sum() <= 0 or (not free_00 and qf[free].max() <= 0):
        raise DegenerateInput("q has no mass outside the (0,0) outcomes; nothing to reward")

    rows = _lr_rows()
    const = rows[:, fixed].sum(axis=1)  # fixed entries are 1
    A = rows[:, free]
    active = np.abs(A).sum(axis=1) > 0
    if (const[~active] > 1 + 1e-12).any():
        raise DegenerateInput("pinned entries already violate an LR constraint")
    A, cap = A[active], 1.0 - const[active]
    w = qf[free]

    u, info = _barrier_solve(w, A, cap, cfg)
    t = np.ones(16)
    t[free] = u
    bf = BellFunction(t.reshape(SHAPE))
    if return_info:
        return bf, info
    return bf


def _barrier_solve(w, A, cap, cfg, mu0=1e-4, shrink=0.1):
    """Interior-point ascent of sum w ln u subject to A u <= cap, u > 0."""
    k = w.size
    u = np.full(k, 0.5)
    slack = cap - A @ u
    if (slack <= 0).any():
        raise DegenerateInput("no strictly feasible starting point")
    n_barrier = A.shape[0] + k
    mu = mu0
    gap_target = cfg.objective_tol * 1e-2
    newton_steps = 0

    def gain(u, d, s, mu):
        # increase of  sum w ln u + mu sum ln slack + mu sum ln u  along s*d
        r = s * d / u
        ad = A @ d
        return float((w + mu) @ np.log1p(r) + mu * np.sum(np.log1p(-s * ad / (cap - A @ u))))

    stuck = False
    while True:
        for _ in range(200):
            slack = cap - A @ u
            g = (w + mu) / u - mu * (A.T @ (1.0 / slack))
            H = np.diag((w + mu) / u**2) + mu * (A.T * (1.0 / slack**2)) @ A
            d = np.linalg.solve(H, g)
            dec = float(g @ d)
            if dec / 2 <= 1e-3 * mu * n_barrier or dec < 1e-26:
                break
            if slack.min() < 1e-15 and dec < 1e-14:
                stuck = True  # an active slack is at the rounding floor; the remaining gain is below it too
                break
            s = 1.0
            while ((u + s * d) <= 0).any() or ((cap - A @ (u + s * d)) <= 0).any():
                s *= 0.5
            while s > 1e-12 and gain(u, d, s, mu) < 0.25 * s * dec:
                s *= 0.5
            if s <= 1e-12:
                break  # the Hessian is near-singular at this mu; no further progress in float64
            nxt = u + s * d
            if np.array_equal(nxt, u):
                stuck = True  # active slacks are at the rounding floor
                break
            u = nxt
            newton_steps += 1
        else:
            raise NotConverged("barrier Newton iterations did not converge")
        # the barrier point is within mu * n_barrier of the optimum
        if mu * n_barrier <= gap_target or stuck:
            break
        mu *= shrink
    return u, {"newton_steps": newton_steps, "duality_gap": mu * n_barrier}


def compute_m(t: BellFunction) -> BellBound:
    """Non-signaling bound: max of E(T) - 1 over the 24 polytope vertices."""
    vals = np.array([t.expectation(v) for v in ns_vertices()])
    k = int(np.argmax(vals))
    m = float(vals[k] - 1.0)
    if m <= 0:
        raise NoViolationPossible(f"max E(T) over non-signaling vertices is {vals[k]!r} <= 1")
    return BellBound(m=m, achieving_vertex=k, vertex_values=vals)


def normal_quantile(p: float) -> float:
    return float(ndtri(p))


def log_moments(t: BellFunction, q: JointDistribution):
    """(E(ln T), Var(ln T)) under q."""
    lt = t.log_table()
    mu = float(np.sum(q.p * lt))
    sigma2 = float(np.sum(q.p * (lt - mu) ** 2))
    return mu, sigma2


def choose_vthresh(t: BellFunction, q: JointDistribution, n: int, quantile: float = 0.95) -> ThresholdPlan:
    """Threshold that n i.i.d. trials from q exceed with the given probability (CLT)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < quantile < 1:
        raise ValueError("quantile must lie in (0, 1)")
    mu, sigma2 = log_moments(t, q)
    z = normal_quantile(quantile)
    ln_v = n * mu - z * np.sqrt(n * sigma2)
    return ThresholdPlan(ln_vthresh=max(float(ln_v), 0.0), mu=mu, sigma2=sigma2, quantile=quantile, n=n, z=z)


def asymptotic_rate(t: BellFunction, q: JointDistribution, m: float) -> float:
    """Certified bits per trial in the long-run limit: E(log2 T)_q / (2m)."""
    if m <= 0:
        raise ValueError("m must be positive")
    return float(np.sum(q.p * np.log(t.t)) * LOG2E / (2 * m))
