"""Exhaustive strong-extractor checks at desk scale.

For tiny parameters the whole extractor is a table: output bit i depends only
on the input and on the first 2l seed bits of design set S_i.  TV distances of
(output, seed) from (uniform, seed) can then be computed exactly for any flat
source, and a collision-probability bound covers every flat source at once.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .extractor import one_bit_extract


def implied_eps(t: int, sigma: float) -> float:
    """Smallest eps allowed by t + 4 log2 t <= sigma - 6 + 4 log2 eps."""
    return 2.0 ** ((t + 4 * math.log2(t) - sigma + 6) / 4)


def one_bit_table(q: int, l: int) -> np.ndarray:
    """E[x, s] for every q-bit input x and every 2l-bit subseed s (bit j of an int = position j)."""
    table = np.zeros((1 << q, 1 << (2 * l)), dtype=np.uint8)
    for x in range(1 << q):
        xb = [(x >> j) & 1 for j in range(q)]
        for s in range(1 << (2 * l)):
            sb = [(s >> j) & 1 for j in range(2 * l)]
            table[x, s] = one_bit_extract(xb, sb, l)
    return table


def flat_source_tv(table: np.ndarray, source, t: int) -> float:
    """Exact TV of (Ext(X, S), S) from (U_t, S) for X uniform on ``source``.

    Output bits use disjoint effective subseeds, so the seed space factorizes
    into t independent copies of the 2l-bit subseed.
    """
    rows = table[np.asarray(list(source))].astype(np.int64)  # K x 2^(2l)
    k, n_sub = rows.shape
    tv = 0.0
    # enumerate output patterns and subseed tuples through per-bit indicator matrices
    for pattern in itertools.product((0, 1), repeat=t):
        ind = [rows if p else 1 - rows for p in pattern]
        # counts[s_1, ..., s_t] = #{x : bit_i(x, s_i) = pattern_i}
        counts = ind[0]
        for m in ind[1:]:
            counts = counts[..., None] * m.reshape((k,) + (1,) * (counts.ndim - 1) + (n_sub,))
        counts = counts.sum(axis=0)
        tv += np.abs(counts / k - 2.0**-t).sum()
    return 0.5 * tv / n_sub**t


def collision_bound(table: np.ndarray, k: int, t: int) -> float:
    """Upper bound on flat_source_tv valid for every source of size k.

    TV <= 1/2 sqrt(2^t Pr[Ext(x,S) = Ext(x',S)] - 1), and for distinct x, x' the
    collision probability is c(x, x')^t where c is the single-bit agreement rate
    over subseeds; bounding c by its maximum over all pairs covers every source.
    """
    n_in, n_sub = table.shape
    words = np.packbits(table, axis=1, bitorder="little")
    cmax = 0.0
    for i in range(n_in - 1):
        diff = np.bitwise_xor(words[i + 1:], words[i])
        disagree = np.unpackbits(diff, axis=1).sum(axis=1)
        cmax = max(cmax, 1.0 - disagree.min() / n_sub)
    coll = 1.0 / k + (1.0 - 1.0 / k) * cmax**t
    return 0.5 * math.sqrt(max(2.0**t * coll - 1.0, 0.0))


def adversarial_source(table: np.ndarray, k: int) -> np.ndarray:
    """Flat source of the k inputs whose bits are 0 for the most subseeds.

    Every output bit then leans toward 0, a natural worst case for the check.
    """
    zeros = (table == 0).sum(axis=1)
    order = np.lexsort((np.arange(table.shape[0]), -zeros))
    return np.sort(order[:k])
