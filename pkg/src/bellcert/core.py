"""Trials, counts, joint distributions and the 2x2x2x2 non-signaling polytope.

Every probability table is a float64 array of shape ``(2, 2, 2, 2)`` indexed
``[a, b, x, y]``.  Outcomes are encoded ``+`` -> 1 (detection) and ``0`` -> 0.
A trial is packed into one byte: bit0 = x, bit1 = y, bit2 = a, bit3 = b.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import MalformedTrialData, ZeroSettingProbability

SHAPE = (2, 2, 2, 2)
SETTINGS = ((0, 0), (0, 1), (1, 0), (1, 1))
# column order used by the published tables: ab = ++, +0, 0+, 00
OUTCOMES_TABLE_ORDER = ((1, 1), (1, 0), (0, 1), (0, 0))


def _bit(value, name):
    v = int(value)
    if v not in (0, 1) or v != value:
        raise ValueError(f"{name} must be 0 or 1, got {value!r}")
    return v


@dataclass(frozen=True)
class TrialRecord:
    x: int
    y: int
    a: int
    b: int

    def __post_init__(self):
        for name in ("x", "y", "a", "b"):
            object.__setattr__(self, name, _bit(getattr(self, name), name))

    @property
    def code(self) -> int:
        return self.x | (self.y << 1) | (self.a << 2) | (self.b << 3)

    @classmethod
    def from_code(cls, code: int) -> "TrialRecord":
        code = int(code)
        if code & 0xF0:
            raise ValueError(f"trial byte {code:#04x} has nonzero high bits")
        return cls(x=code & 1, y=(code >> 1) & 1, a=(code >> 2) & 1, b=(code >> 3) & 1)


def encode(x, y, a, b) -> np.ndarray:
    """Pack arrays of settings and outcomes into trial bytes."""
    x, y, a, b = (np.asarray(v, dtype=np.uint8) for v in (x, y, a, b))
    return (x | (y << 1) | (a << 2) | (b << 3)).astype(np.uint8)


def decode(codes: np.ndarray):
    """Unpack trial bytes into ``(x, y, a, b)`` uint8 arrays."""
    codes = np.asarray(codes, dtype=np.uint8)
    return codes & 1, (codes >> 1) & 1, (codes >> 2) & 1, (codes >> 3) & 1


def as_codes(stream) -> np.ndarray:
    """Normalize a stream (byte array or iterable of TrialRecord) to a uint8 array."""
    if isinstance(stream, np.ndarray):
        codes = stream.astype(np.uint8, copy=False)
    elif isinstance(stream, (bytes, bytearray, memoryview)):
        codes = np.frombuffer(stream, dtype=np.uint8)
    else:
        codes = np.fromiter((r.code for r in stream), dtype=np.uint8)
    if codes.size and int(codes.max()) > 15:
        bad = int(np.argmax(codes > 15))
        raise MalformedTrialData(f"trial {bad}: byte {int(codes[bad]):#04x} has nonzero high bits")
    return codes


def records(codes: Sequence[int]) -> Iterator[TrialRecord]:
    for c in np.asarray(codes, dtype=np.uint8):
        yield TrialRecord.from_code(int(c))


def _code_index(a, b, x, y):
    return x | (y << 1) | (a << 2) | (b << 3)


# reshaping a length-16 histogram over codes (C order) gives axes [b, a, y, x]
def _hist_to_abxy(hist: np.ndarray) -> np.ndarray:
    return np.asarray(hist).reshape(2, 2, 2, 2).transpose(1, 0, 3, 2)


def abxy_to_code_table(table: np.ndarray) -> np.ndarray:
    """Flatten an ``[a, b, x, y]`` table into a length-16 lookup indexed by trial byte."""
    return np.ascontiguousarray(np.asarray(table).transpose(1, 0, 3, 2)).reshape(16)


@dataclass(frozen=True)
class CountsTable:
    counts: np.ndarray
    n_total: int = -1

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64).reshape(SHAPE)
        if (c < 0).any():
            raise ValueError("counts must be nonnegative")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        total = int(c.sum())
        if self.n_total == -1:
            object.__setattr__(self, "n_total", total)
        elif int(self.n_total) != total:
            raise ValueError(f"n_total={self.n_total} but entries sum to {total}")

    @classmethod
    def from_grid(cls, rows) -> "CountsTable":
        """Build from the published 4x4 layout: rows xy=00,01,10,11; columns ab=++,+0,0+,00."""
        rows = np.asarray(rows, dtype=np.int64)
        c = np.zeros(SHAPE, dtype=np.int64)
        for i, (x, y) in enumerate(SETTINGS):
            for j, (a, b) in enumerate(OUTCOMES_TABLE_ORDER):
                c[a, b, x, y] = rows[i, j]
        return cls(c)

    def grid(self) -> np.ndarray:
        return _to_grid(self.counts)

    def setting_totals(self) -> np.ndarray:
        """N(x, y) as a (2, 2) array."""
        return self.counts.sum(axis=(0, 1))

    def conditional_frequencies(self) -> np.ndarray:
        """f(ab|xy) = N(ab|xy) / N(xy)."""
        nxy = self.setting_totals()
        if (nxy == 0).any():
            raise ZeroSettingProbability("a settings pair has no trials")
        return self.counts / nxy[None, None, :, :]

    def frequencies(self) -> "JointDistribution":
        if self.n_total == 0:
            raise ValueError("empty counts table")
        return JointDistribution(self.counts / self.n_total)

    def __add__(self, other: "CountsTable") -> "CountsTable":
        return CountsTable(self.counts + other.counts)


def _to_grid(table: np.ndarray) -> np.ndarray:
    out = np.zeros((4, 4), dtype=np.asarray(table).dtype)
    for i, (x, y) in enumerate(SETTINGS):
        for j, (a, b) in enumerate(OUTCOMES_TABLE_ORDER):
            out[i, j] = table[a, b, x, y]
    return out


def _from_grid(rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    t = np.zeros(SHAPE)
    for i, (x, y) in enumerate(SETTINGS):
        for j, (a, b) in enumerate(OUTCOMES_TABLE_ORDER):
            t[a, b, x, y] = rows[i, j]
    return t


_CHUNK = 1 << 24


def counts_from_stream(stream) -> CountsTable:
    """Tally a trial stream into a CountsTable.

    Large arrays are counted in chunks; integer histograms merge exactly, so the
    result does not depend on the chunking.
    """
    codes = as_codes(stream)
    hist = np.zeros(16, dtype=np.int64)
    for start in range(0, codes.size, _CHUNK):
        hist += np.bincount(codes[start:start + _CHUNK], minlength=16)[:16]
    return CountsTable(_hist_to_abxy(hist))


@dataclass(frozen=True)
class JointDistribution:
    """A probability table p(a, b, x, y) over the 16 trial results."""

    p: np.ndarray
    atol: float = field(default=1e-12, repr=False, compare=False)

    def __post_init__(self):
        p = np.array(self.p, dtype=np.float64).reshape(SHAPE)
        if (p < 0).any():
            raise ValueError("probabilities must be nonnegative")
        total = p.sum()
        if abs(total - 1.0) > self.atol:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_grid(cls, rows, normalize: bool = False) -> "JointDistribution":
        t = _from_grid(rows)
        if normalize:
            t = t / t.sum()
        return cls(t)

    @classmethod
    def from_conditionals(cls, cond, settings=None) -> "JointDistribution":
        """Combine p(ab|xy) with a settings distribution (uniform by default)."""
        cond = np.asarray(cond, dtype=float).reshape(SHAPE)
        s = np.full((2, 2), 0.25) if settings is None else np.asarray(settings, dtype=float)
        return cls(cond * s[None, None, :, :])

    def grid(self) -> np.ndarray:
        return _to_grid(self.p)

    def settings_marginal(self) -> np.ndarray:
        return self.p.sum(axis=(0, 1))

    def conditional(self) -> np.ndarray:
        """p(ab|xy); raises ZeroSettingProbability if some p(x, y) is zero."""
        pxy = self.settings_marginal()
        if (pxy <= 0).any():
            raise ZeroSettingProbability("conditional undefined: some p(x,y) = 0")
        return self.p / pxy[None, None, :, :]

    def alice_conditional(self) -> np.ndarray:
        """p(a|x,y) with axes [a, x, y]."""
        return self.conditional().sum(axis=1)

    def bob_conditional(self) -> np.ndarray:
        """p(b|x,y) with axes [b, x, y]."""
        return self.conditional().sum(axis=0)

    def expectation(self, table) -> float:
        return float(np.sum(self.p * np.asarray(table, dtype=float).reshape(SHAPE)))

    def max_conditional(self) -> float:
        return float(self.conditional().max())

    def code_probabilities(self) -> np.ndarray:
        return abxy_to_code_table(self.p)


def mixture(weights, dists: Sequence[JointDistribution]) -> JointDistribution:
    w = np.asarray(weights, dtype=float)
    p = np.tensordot(w, np.stack([d.p for d in dists]), axes=1)
    return JointDistribution(p / p.sum())


def lr_labels() -> list[tuple[int, int, int, int]]:
    """Hidden-variable labels (a0, a1, b0, b1) in enumeration order."""
    return list(itertools.product((0, 1), repeat=4))


def lr_vertices() -> list[JointDistribution]:
    """The 16 deterministic local-realist distributions with uniform settings."""
    out = []
    for a0, a1, b0, b1 in lr_labels():
        p = np.zeros(SHAPE)
        for x, y in SETTINGS:
            p[(a0, a1)[x], (b0, b1)[y], x, y] = 0.25
        out.append(JointDistribution(p))
    return out


def pr_labels() -> list[tuple[int, int, int]]:
    """PR-box labels (output_flip, sx, sy); box index k = 4*flip + 2*sx + sy."""
    return list(itertools.product((0, 1), repeat=3))


def pr_box(flip: int = 0, sx: int = 0, sy: int = 0) -> JointDistribution:
    """PR box with a xor b = [x^sx = 1 and y^sy = 1] xor flip, uniform settings.

    ``pr_box()`` is the canonical box: correlated unless xy = 11.
    """
    p = np.zeros(SHAPE)
    for x, y in SETTINGS:
        parity = ((x ^ sx) & (y ^ sy)) ^ flip
        for a in (0, 1):
            p[a, a ^ parity, x, y] = 0.125
    return JointDistribution(p)


def pr_boxes() -> list[JointDistribution]:
    return [pr_box(*lab) for lab in pr_labels()]


def ns_vertices() -> list[JointDistribution]:
    """All 24 extreme points: 16 LR vertices followed by 8 PR boxes."""
    return lr_vertices() + pr_boxes()


def vertex_matrix() -> np.ndarray:
    """(24, 16) matrix whose rows are the flattened polytope vertices."""
    return np.stack([v.p.reshape(16) for v in ns_vertices()])


def signaling_gaps(d: JointDistribution) -> np.ndarray:
    """The largest violations of the two non-signaling equalities, as ``[alice, bob]``."""
    pa = d.alice_conditional()
    pb = d.bob_conditional()
    alice = np.abs(pa[:, :, 0] - pa[:, :, 1]).max()
    bob = np.abs(pb[:, 0, :] - pb[:, 1, :]).max()
    return np.array([alice, bob])


def is_nonsignaling(d: JointDistribution, tol: float = 1e-12) -> bool:
    return bool(signaling_gaps(d).max() <= tol)


def tv_distance(d1, d2) -> float:
    p1 = d1.p if isinstance(d1, JointDistribution) else np.asarray(d1, dtype=float)
    p2 = d2.p if isinstance(d2, JointDistribution) else np.asarray(d2, dtype=float)
    return 0.5 * float(np.abs(p1 - p2).sum())


def coarse_grain(d, mapping: Iterable[int], n_out: int | None = None) -> np.ndarray:
    """Push a distribution through a deterministic map of the 16 flattened cells."""
    p = d.p.reshape(16) if isinstance(d, JointDistribution) else np.asarray(d, dtype=float).reshape(-1)
    mapping = np.asarray(list(mapping), dtype=np.int64)
    return np.bincount(mapping, weights=p, minlength=n_out or int(mapping.max()) + 1)
