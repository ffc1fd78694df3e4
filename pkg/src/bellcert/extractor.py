"""Trevisan-style strong extractor: a Reed-Solomon-Hadamard one-bit extractor
applied to subsets of a shared seed chosen by a block weak design.

Bit strings are uint8 arrays of 0/1 values.  Field elements of GF(2^l) are
integers whose bit j is the coefficient of x^j; a block of l bits maps bit j to
x^j (little-endian).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numba
import numpy as np
from scipy import sparse

from .errors import InvalidPrime, LengthMismatch
from .gf2 import GF2Field, irreducible_poly

# the TBB layer numba prefers is too old in common installs and warns on first use
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

E = math.e
_SHRINK = math.log2(E) - math.log2(E - 1)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def next_prime_above(n: int) -> int:
    p = n + 1
    while not is_prime(p):
        p += 1
    return p


def max_output_bits(delta_log2: float, kappa: float, eps_ext: float) -> int:
    """Largest t with t + 4 log2 t <= -log2 delta + log2 kappa + 5 log2 eps_ext - 11."""
    if not 0 < kappa <= 1:
        raise ValueError("kappa must lie in (0, 1]")
    if not 0 < eps_ext < 1:
        raise ValueError("eps_ext must lie in (0, 1)")
    rhs = -delta_log2 + math.log2(kappa) + 5 * math.log2(eps_ext) - 11
    if rhs < 1:
        return 0
    lo, hi = 1, int(math.floor(rhs))  # t = 1 fits; t + 4 log2 t > t
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if mid + 4 * math.log2(mid) <= rhs:
            lo = mid
        else:
            hi = mid - 1
    return lo


def field_degree(q: int, t: int, eps: float) -> int:
    """l = ceil(log2(4 q t^2 / eps^2))."""
    return math.ceil(2 + math.log2(q) + 2 * math.log2(t) - 2 * math.log2(eps))


def block_count(t: int, w: int) -> int:
    """max{2, 1 + ceil((log2(t - e) - log2(w - e)) / (log2 e - log2(e - 1)))}."""
    if t <= E:
        return 2
    return max(2, 1 + math.ceil((math.log2(t - E) - math.log2(w - E)) / _SHRINK))


@dataclass(frozen=True)
class ExtractorPlan:
    q: int
    t: int
    eps: float
    sigma: float | None
    l: int
    w: int
    blocks: int

    @property
    def d(self) -> int:
        return self.w * self.w * self.blocks

    def entropy_sufficient(self) -> bool:
        """t + 4 log2 t <= sigma - 6 + 4 log2 eps."""
        if self.sigma is None:
            return False
        return self.t + 4 * math.log2(self.t) <= self.sigma - 6 + 4 * math.log2(self.eps)


def plan(q: int, t: int, eps: float, sigma: float | None = None) -> ExtractorPlan:
    if q < 1 or t < 1:
        raise ValueError("q and t must be >= 1")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    l = field_degree(q, t, eps)
    w = next_prime_above(2 * l)
    return ExtractorPlan(q=q, t=t, eps=eps, sigma=sigma, l=l, w=w, blocks=block_count(t, w))


def plan_for_protocol(n: int, t: int, eps_ext: float, kappa: float, delta_log2: float) -> ExtractorPlan:
    """Extractor for the 2n outcome bits of a passed run.

    Per-extractor error is eps_ext / 2 and sigma = -log2(2 delta / (kappa eps_ext)).
    """
    sigma = -delta_log2 - 1 + math.log2(kappa) + math.log2(eps_ext)
    return plan(2 * n, t, eps_ext / 2, sigma=sigma)


# ---------------------------------------------------------------- weak design

@dataclass(frozen=True)
class WeakDesign:
    t: int
    w: int
    blocks: int
    sets: np.ndarray  # (t, w) seed indices, increasing within each row
    degrees: tuple[int, ...]  # largest polynomial degree used in each block

    @property
    def d(self) -> int:
        return self.w * self.w * self.blocks

    def overlap_weights(self) -> np.ndarray:
        """sum_{j<i} 2^{|S_i & S_j|} for every i."""
        rows = np.repeat(np.arange(self.t), self.w)
        member = sparse.csr_matrix((np.ones(rows.size), (rows, self.sets.reshape(-1))), shape=(self.t, self.d))
        inter = (member @ member.T).tocoo()
        below = inter.row > inter.col
        out = np.full(self.t, 0.0)
        np.add.at(out, inter.row[below], np.exp2(inter.data[below]))
        # pairs with empty intersection are absent from the sparse product and weigh 2^0 = 1
        out += np.arange(self.t) - np.bincount(inter.row[below], minlength=self.t)
        return out


def _poly_values(k: int, w: int, pts: np.ndarray) -> tuple[np.ndarray, int]:
    """Values at pts of polynomial number k (coefficients = base-w digits of k, c0 first)."""
    coeffs = []
    while True:
        coeffs.append(k % w)
        k //= w
        if k == 0:
            break
    vals = np.zeros_like(pts)
    for c in reversed(coeffs):
        vals = (vals * pts + c) % w
    deg = max((i for i, c in enumerate(coeffs) if c), default=0)
    return vals, deg


def build_weak_design(t: int, w: int, blocks: int | None = None) -> WeakDesign:
    """Block weak design with sets S = {(a, p(a)) : a in GF(w)} inside w x w grids.

    Block b occupies seed indices [b w^2, (b+1) w^2) and the point (a, v) maps to
    b w^2 + a w + v.  Polynomials over GF(w) are numbered by their little-endian
    coefficient vectors (polynomial k has c_j = j-th base-w digit of k), and each
    block takes the longest prefix 0, 1, 2, ... of that numbering whose overlap
    weights sum_{j<i} 2^{|S_i & S_j|}, counted against every set placed so far,
    stay at most t - 1.  A block stops early to leave one set for every later
    block, so the design spans exactly ``blocks`` grids.  The largest degree used
    in a block follows from how far its prefix reaches.
    """
    if not is_prime(w):
        raise InvalidPrime(f"{w} is not prime")
    if t < 1:
        raise ValueError("t must be >= 1")
    if blocks is None:
        blocks = block_count(t, w)
    pts = np.arange(w, dtype=np.int64)
    budget = t - 1
    rows, degrees = [], []
    placed = 0
    for b in range(blocks):
        want = t - placed - (blocks - 1 - b)
        taken = np.empty((max(want, 0), w), dtype=np.int64)
        n_in, deg_used = 0, 0
        while n_in < want and n_in < w**w:
            vals, deg = _poly_values(n_in, w, pts)
            weight = placed + int(np.sum(np.left_shift(1, (taken[:n_in] == vals).sum(axis=1))))
            if weight > budget:
                break
            taken[n_in] = vals
            n_in += 1
            deg_used = max(deg_used, deg)
        if n_in == 0 and want > 0:
            raise ValueError(f"block {b} of the design for t={t}, w={w} accepted no sets")
        rows.extend(b * w * w + pts * w + taken[:n_in])
        placed += n_in
        degrees.append(deg_used)
    if placed < t:
        raise ValueError(f"weak design for t={t}, w={w} does not fit in {blocks} blocks")
    return WeakDesign(t=t, w=w, blocks=blocks, sets=np.array(rows, dtype=np.int64).reshape(t, w),
                      degrees=tuple(degrees))


# ---------------------------------------------------------------- one-bit extractor

def _bits_to_int(bits) -> int:
    out = 0
    for j, bit in enumerate(bits):
        if bit:
            out |= 1 << j
    return out


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise LengthMismatch("bit strings must be one-dimensional")
    if arr.size and arr.max() > 1:
        raise ValueError("bit strings must contain only 0 and 1")
    return arr


def one_bit_extract(input_bits, subseed, l: int) -> int:
    """Reed-Solomon-Hadamard bit (reference implementation in Python integers).

    The input, zero-padded to a multiple of l, gives coefficients c_0 .. c_{k-1}
    of P(z) = sum c_i z^i over GF(2^l).  Subseed bits [0, l) give the point z and
    bits [l, 2l) the mask; the output is the parity of P(z) AND mask.
    """
    x = _as_bits(input_bits)
    s = _as_bits(subseed)
    if s.size < 2 * l:
        raise LengthMismatch(f"subseed has {s.size} bits, needs at least {2 * l}")
    field = GF2Field(l)
    coeffs = [_bits_to_int(x[i:i + l]) for i in range(0, x.size, l)]
    value = field.eval_poly(coeffs, _bits_to_int(s[:l]))
    return bin(value & _bits_to_int(s[l:2 * l])).count("1") & 1


# fast path: elements of GF(2^l), l <= 128, as (lo, hi) uint64 pairs

_ONE = np.uint64(1)


@numba.njit(cache=True)
def _pack_coeffs(bits, l):
    k = (bits.size + l - 1) // l
    lo = np.zeros(k, dtype=np.uint64)
    hi = np.zeros(k, dtype=np.uint64)
    for i in range(bits.size):
        if bits[i]:
            c = i // l
            j = i - c * l
            if j < 64:
                lo[c] |= np.uint64(1) << np.uint64(j)
            else:
                hi[c] |= np.uint64(1) << np.uint64(j - 64)
    return lo, hi


@numba.njit(cache=True)
def _bits_pair(bits, start, l):
    lo = np.uint64(0)
    hi = np.uint64(0)
    for j in range(l):
        if bits[start + j]:
            if j < 64:
                lo |= np.uint64(1) << np.uint64(j)
            else:
                hi |= np.uint64(1) << np.uint64(j - 64)
    return lo, hi


@numba.njit(cache=True)
def _popcount(v):
    c = 0
    while v:
        v &= v - np.uint64(1)
        c += 1
    return c


@numba.njit(cache=True)
def _mul_table(alo, ahi, l, flo, fhi, nbytes):
    """table[p, v] = (v x^(8p)) * alpha mod f, for the Horner multiply-by-alpha."""
    basis_lo = np.zeros(l, dtype=np.uint64)
    basis_hi = np.zeros(l, dtype=np.uint64)
    lo, hi = alo, ahi
    for j in range(l):
        basis_lo[j] = lo
        basis_hi[j] = hi
        # multiply by x
        top = (hi >> np.uint64(63)) if l == 128 else np.uint64(0)
        hi = (hi << np.uint64(1)) | (lo >> np.uint64(63))
        lo = lo << np.uint64(1)
        if l < 64:
            over = (lo >> np.uint64(l)) & np.uint64(1)
            lo &= (np.uint64(1) << np.uint64(l)) - np.uint64(1)
        elif l == 64:
            over = hi & np.uint64(1)
            hi = np.uint64(0)
        elif l < 128:
            over = (hi >> np.uint64(l - 64)) & np.uint64(1)
            hi &= (np.uint64(1) << np.uint64(l - 64)) - np.uint64(1)
        else:
            over = top
        if over:
            lo ^= flo
            hi ^= fhi
    tlo = np.zeros((nbytes, 256), dtype=np.uint64)
    thi = np.zeros((nbytes, 256), dtype=np.uint64)
    for p in range(nbytes):
        for v in range(1, 256):
            low = v & (-v)
            bit = 0
            while (1 << bit) != low:
                bit += 1
            j = 8 * p + bit
            prev = v ^ low
            if j < l:
                tlo[p, v] = tlo[p, prev] ^ basis_lo[j]
                thi[p, v] = thi[p, prev] ^ basis_hi[j]
            else:
                tlo[p, v] = tlo[p, prev]
                thi[p, v] = thi[p, prev]
    return tlo, thi


@numba.njit(cache=True)
def _extract_bit(clo, chi, sub, l, flo, fhi):
    nbytes = (l + 7) // 8
    alo, ahi = _bits_pair(sub, 0, l)
    mlo, mhi = _bits_pair(sub, l, l)
    tlo, thi = _mul_table(alo, ahi, l, flo, fhi, nbytes)
    acc_lo = np.uint64(0)
    acc_hi = np.uint64(0)
    for i in range(clo.size - 1, -1, -1):
        nlo = clo[i]
        nhi = chi[i]
        for p in range(nbytes):
            if p < 8:
                byte = (acc_lo >> np.uint64(8 * p)) & np.uint64(255)
            else:
                byte = (acc_hi >> np.uint64(8 * (p - 8))) & np.uint64(255)
            nlo ^= tlo[p, byte]
            nhi ^= thi[p, byte]
        acc_lo = nlo
        acc_hi = nhi
    return (_popcount(acc_lo & mlo) + _popcount(acc_hi & mhi)) & 1


@numba.njit(cache=True, parallel=True)
def _extract_all(clo, chi, seed, sets, l, flo, fhi):
    t = sets.shape[0]
    out = np.zeros(t, dtype=np.uint8)
    for i in numba.prange(t):
        sub = seed[sets[i]]
        out[i] = _extract_bit(clo, chi, sub, l, flo, fhi)
    return out


def _modulus_words(l: int):
    f = irreducible_poly(l) ^ (1 << l)
    return np.uint64(f & (2**64 - 1)), np.uint64(f >> 64)


def _set_threads():
    cap = os.environ.get("BELLCERT_THREADS")
    if cap:
        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))


def extract(input_bits, seed_bits, plan: ExtractorPlan, design: WeakDesign) -> np.ndarray:
    """Output bit i = one_bit_extract(input, seed restricted to S_i, l)."""
    x = _as_bits(input_bits)
    s = _as_bits(seed_bits)
    if x.size != plan.q:
        raise LengthMismatch(f"input has {x.size} bits, plan expects {plan.q}")
    if s.size != plan.d:
        raise LengthMismatch(f"seed has {s.size} bits, plan expects {plan.d}")
    if design.t != plan.t or design.w != plan.w or design.d != plan.d:
        raise LengthMismatch("design does not match plan")
    if 2 * plan.l > plan.w:
        raise LengthMismatch("design sets are too small for the field degree")
    _set_threads()
    clo, chi = _pack_coeffs(x, plan.l)
    flo, fhi = _modulus_words(plan.l)
    return _extract_all(clo, chi, s, design.sets, plan.l, flo, fhi)


def extract_reference(input_bits, seed_bits, design: WeakDesign, l: int) -> np.ndarray:
    """Slow bit-by-bit composition through ``one_bit_extract``."""
    s = _as_bits(seed_bits)
    return np.array([one_bit_extract(input_bits, s[row], l) for row in design.sets], dtype=np.uint8)


def outcome_bits(codes) -> np.ndarray:
    """Bits (a_i, b_i) of each trial at positions (2i, 2i+1)."""
    from .core import as_codes, decode

    _, _, a, b = decode(as_codes(codes))
    return np.stack([a, b], axis=1).reshape(-1)
