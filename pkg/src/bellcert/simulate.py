"""Synthetic trial streams for desk-scale verification.

Randomness comes from numpy's Philox4x64 keyed by the 64-bit seed.  Trial i
owns counter block i, i.e. raw words 4i .. 4i+3 of the stream:

    word 0 -> Alice's setting, word 1 -> mixture component,
    word 2 -> outcome pair,    word 3 -> Bob's setting.

A word becomes a uniform double as (w >> 11) * 2^-53.  Any range of trials can
therefore be generated on its own (``Philox.advance``) and the result does not
depend on chunking.  Uniform settings are the biased case with px1 = py1 = 1/2,
so ``sample_stream`` and ``biased_settings_stream(..., 0.5, 0.5, ...)`` agree
byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import JointDistribution, encode

CHUNK = 1 << 20
_SCALE = 2.0**-53


@dataclass(frozen=True)
class MixtureSpec:
    components: tuple = field(default_factory=tuple)  # (weight, JointDistribution) pairs

    def __post_init__(self):
        comps = tuple((float(w), d) for w, d in self.components)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        ws = np.array([w for w, _ in comps])
        if (ws < 0).any() or abs(ws.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        object.__setattr__(self, "components", comps)

    @classmethod
    def single(cls, d: JointDistribution) -> "MixtureSpec":
        return cls(((1.0, d),))

    def mean(self) -> JointDistribution:
        return JointDistribution(sum(w * d.p for w, d in self.components))


@dataclass(frozen=True)
class DriftSchedule:
    """Segments of (length, distribution); the last segment continues past its length."""

    segments: tuple = field(default_factory=tuple)

    def __post_init__(self):
        segs = tuple((int(n), d) for n, d in self.segments)
        if not segs:
            raise ValueError("a schedule needs at least one segment")
        if any(n < 1 for n, _ in segs):
            raise ValueError("segment lengths must be >= 1")
        object.__setattr__(self, "segments", segs)


def _outcome_cdfs(dists) -> np.ndarray:
    """cdf[k, x, y, j] over outcome pairs j = 2a + b, last column exactly 1."""
    out = np.empty((len(dists), 2, 2, 4))
    for k, d in enumerate(dists):
        cond = d.conditional()  # [a, b, x, y]
        flat = cond.transpose(2, 3, 0, 1).reshape(2, 2, 4)
        out[k] = np.cumsum(flat, axis=-1)
    out[..., 3] = 1.0
    return out


def _uniforms(words: np.ndarray) -> np.ndarray:
    return (words >> np.uint64(11)).astype(np.float64) * _SCALE


def _raw_block(seed: int, start: int, count: int) -> np.ndarray:
    bg = np.random.Philox(key=np.uint64(seed & (2**64 - 1)))
    if start:
        bg.advance(start)
    return bg.random_raw(4 * count).reshape(count, 4)


def _sample_chunk(seed, start, count, px1, py1, comp_cum, cdfs):
    raw = _raw_block(seed, start, count)
    x = (_uniforms(raw[:, 0]) < px1).astype(np.uint8)
    y = (_uniforms(raw[:, 3]) < py1).astype(np.uint8)
    if comp_cum is None:
        comp = np.zeros(count, dtype=np.intp)
    else:
        comp = np.searchsorted(comp_cum, _uniforms(raw[:, 1]), side="right")
        comp = np.minimum(comp, len(comp_cum) - 1)
    cum = cdfs[comp, x, y]  # count x 4
    j = (_uniforms(raw[:, 2])[:, None] >= cum[:, :3]).sum(axis=1)
    return encode(x, y, (j >> 1).astype(np.uint8), (j & 1).astype(np.uint8))


def _stream(spec, n, seed, px1, py1):
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0 < px1 < 1 and 0 < py1 < 1):
        raise ValueError("setting probabilities must lie strictly between 0 and 1")
    if isinstance(spec, JointDistribution):
        spec = MixtureSpec.single(spec)
    out = np.empty(n, dtype=np.uint8)
    if isinstance(spec, MixtureSpec):
        ws = np.array([w for w, _ in spec.components])
        comp_cum = np.cumsum(ws)
        comp_cum[-1] = 1.0
        cdfs = _outcome_cdfs([d for _, d in spec.components])
        pieces = [(0, n, comp_cum, cdfs)]
    elif isinstance(spec, DriftSchedule):
        pieces, pos = [], 0
        for i, (length, d) in enumerate(spec.segments):
            end = n if i == len(spec.segments) - 1 else min(n, pos + length)
            if end > pos:
                pieces.append((pos, end, None, _outcome_cdfs([d])))
            pos = end
            if pos >= n:
                break
    else:
        raise TypeError(f"unsupported spec type {type(spec).__name__}")
    for lo, hi, comp_cum, cdfs in pieces:
        for start in range(lo, hi, CHUNK):
            stop = min(hi, start + CHUNK)
            out[start:stop] = _sample_chunk(seed, start, stop - start, px1, py1, comp_cum, cdfs)
    return out


def sample_stream(spec, n: int, rng_seed: int) -> np.ndarray:
    """n trials (uint8 trial bytes) with uniform settings from a mixture, schedule or distribution."""
    return _stream(spec, n, rng_seed, 0.5, 0.5)


def biased_settings_stream(dist, px1: float, py1: float, n: int, rng_seed: int) -> np.ndarray:
    """n trials with independent Bernoulli(px1), Bernoulli(py1) settings."""
    return _stream(dist, n, rng_seed, px1, py1)


def signaling_distribution(pa_x0y0: float = 0.1, pa_x0y1: float = 0.2) -> JointDistribution:
    """Uniform settings; Alice's P(a=1 | x=0, y) depends on y, all other marginals 1/2.

    Outcomes are independent given the settings, so only the first Alice
    equality is violated.
    """
    p = np.zeros((2, 2, 2, 2))
    for x in (0, 1):
        for y in (0, 1):
            pa = (pa_x0y0 if y == 0 else pa_x0y1) if x == 0 else 0.5
            for a in (0, 1):
                for b in (0, 1):
                    p[a, b, x, y] = 0.25 * (pa if a else 1 - pa) * 0.5
    return JointDistribution(p)


def violation_mixture(pr_weight: float = 3e-3) -> MixtureSpec:
    """The XOR 3 fit with its PR part rescaled: pr_weight of the fit's PR box and
    1 - pr_weight of its normalized LR part."""
    from .core import lr_vertices, pr_boxes
    from .data import xor3_ns_fit
    from .pm import pr_weight as decompose

    if not 0 <= pr_weight <= 1:
        raise ValueError("pr_weight must lie in [0, 1]")
    dec = decompose(xor3_ns_fit())
    lr = np.tensordot(dec.lr_weights / dec.lr_weights.sum(), np.array([v.p for v in lr_vertices()]), axes=1)
    lr_part = JointDistribution(lr / lr.sum())
    return MixtureSpec(((pr_weight, pr_boxes()[dec.pr_index]), (1.0 - pr_weight, lr_part)))
