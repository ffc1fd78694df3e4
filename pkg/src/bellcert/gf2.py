"""Arithmetic in GF(2^l) with polynomials stored as Python ints (bit i = coeff of x^i).

The modulus for each l is the lowest-weight irreducible polynomial: the
trinomial x^l + x^k + 1 with the smallest k if one exists, otherwise the
pentanomial x^l + x^k3 + x^k2 + x^k1 + 1 with (k3, k2, k1) lexicographically
smallest.  This is the usual convention of published low-weight tables
(e.g. l = 8 gives x^8 + x^4 + x^3 + x + 1, l = 128 gives x^128 + x^7 + x^2 + x + 1).
"""

from __future__ import annotations

from functools import lru_cache

MAX_DEGREE = 128


def clmul(a: int, b: int) -> int:
    """Carry-less product of two polynomials over GF(2)."""
    if a.bit_length() < b.bit_length():
        a, b = b, a
    out = 0
    while b:
        low = b & -b
        out ^= a << (low.bit_length() - 1)
        b ^= low
    return out


def poly_mod(a: int, f: int) -> int:
    df = f.bit_length() - 1
    while a.bit_length() - 1 >= df:
        a ^= f << (a.bit_length() - 1 - df)
    return a


def poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


def mulmod(a: int, b: int, f: int) -> int:
    return poly_mod(clmul(a, b), f)


def _sqr_mod(a: int, f: int) -> int:
    return mulmod(a, a, f)


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def is_irreducible(f: int) -> bool:
    """Rabin's test: x^(2^l) = x mod f and gcd(x^(2^(l/p)) - x, f) = 1 for primes p | l."""
    l = f.bit_length() - 1
    if l < 1:
        return False
    if l > 1 and not f & 1:
        return False  # divisible by x
    x = 2
    powers = {}
    h = x
    for i in range(1, l + 1):
        h = _sqr_mod(h, f)
        powers[i] = h
    if powers[l] != poly_mod(x, f):
        return False
    for p in _prime_factors(l):
        if poly_gcd(f, powers[l // p] ^ x) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def irreducible_poly(l: int) -> int:
    """The fixed modulus for GF(2^l), 1 <= l <= 128."""
    if not 1 <= l <= MAX_DEGREE:
        raise ValueError(f"no modulus tabulated for degree {l} (supported: 1..{MAX_DEGREE})")
    if l == 1:
        return 0b11
    top = (1 << l) | 1
    for k in range(1, l):
        f = top | (1 << k)
        if is_irreducible(f):
            return f
    for k3 in range(3, l):
        for k2 in range(2, k3):
            for k1 in range(1, k2):
                f = top | (1 << k3) | (1 << k2) | (1 << k1)
                if is_irreducible(f):
                    return f
    raise ValueError(f"no trinomial or pentanomial modulus of degree {l}")


def exponents(f: int) -> tuple[int, ...]:
    """Nonzero exponents of f, highest first."""
    return tuple(i for i in range(f.bit_length() - 1, -1, -1) if f >> i & 1)


class GF2Field:
    """GF(2^l) with the fixed modulus for l."""

    def __init__(self, l: int):
        self.l = l
        self.modulus = irreducible_poly(l)
        self.mask = (1 << l) - 1

    def mul(self, a: int, b: int) -> int:
        return mulmod(a, b, self.modulus)

    def add(self, a: int, b: int) -> int:
        return a ^ b

    def pow(self, a: int, e: int) -> int:
        out = 1
        while e:
            if e & 1:
                out = self.mul(out, a)
            a = self.mul(a, a)
            e >>= 1
        return out

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return self.pow(a, (1 << self.l) - 2)

    def eval_poly(self, coeffs, point: int) -> int:
        """sum_i coeffs[i] * point^i by Horner's rule."""
        acc = 0
        for c in reversed(list(coeffs)):
            acc = self.mul(acc, point) ^ c
        return acc
