"""Multiple harmonic sums and their relatives, evaluated exactly.

Compositions are written outermost first, ``(s_d, ..., s_1)``: the last part
belongs to the smallest summation index.  So ``H_N(s_d, ..., s_1)`` is the sum
over ``lower < n_1 < ... < n_d < N`` of ``n_1^{-s_1} ... n_d^{-s_d}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Sequence

import gmpy2
from gmpy2 import mpq

from .numkit import (
    PAdicApprox,
    as_rational,
    bernoulli,
    binom_general,
    padic_reduce,
    rational_to_str,
    scalar_from_json,
    scalar_to_json,
    valuation,
)

__all__ = [
    "parse_composition",
    "format_composition",
    "compositions_up_to",
    "CharSpec",
    "psi",
    "HarPoint",
    "harmonic_point",
    "harmonic_sum",
    "harmonic_sum_char",
    "harmonic_sum_congruent",
    "tilde_harmonic",
    "tilde_poly",
    "eval_poly",
    "bern_coeff",
    "bern_coeff_nested",
    "finite_mzv",
    "char_weight",
    "harmonic_weight",
    "GeometricClosedForm",
    "geometric_power_sum",
]


# ---------------------------------------------------------------------------
# compositions


def parse_composition(text: str) -> tuple:
    """``"2,1"`` -> (2, 1).  The last number is the innermost part s_1."""
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise ValueError(f"malformed composition {text!r}") from None


def format_composition(parts: Sequence[int]) -> str:
    return ",".join(str(s) for s in parts)


def compositions_up_to(max_weight: int, max_depth: int, min_depth: int = 1) -> Iterator[tuple]:
    """Compositions with positive parts, ordered by depth, weight, then lexicographically."""
    def rec(weight, depth):
        if depth == 0:
            if weight == 0:
                yield ()
            return
        for first in range(1, weight - depth + 2):
            for rest in rec(weight - first, depth - 1):
                yield (first,) + rest

    for d in range(min_depth, max_depth + 1):
        for w in range(d, max_weight + 1):
            yield from rec(w, d)


# ---------------------------------------------------------------------------
# characters


@dataclass(frozen=True)
class CharSpec:
    """A multiplicative function n -> scalar.

    ``power`` characters are n -> n**exponent.  ``tabulated`` characters look
    up ``table[n % modulus]`` and may carry Taylor data
    ``taylor(n0, l) = chi^((l))(n0)`` for translations.
    """

    kind: str = "power"
    exponent: int = 0
    table: tuple = ()
    modulus: int = 0
    taylor: Callable | None = field(default=None, compare=False)

    def __call__(self, n: int):
        if self.kind == "power":
            if n == 0:
                if self.exponent < 0:
                    raise ValueError(f"character n^{self.exponent} is undefined at 0")
                return mpq(1) if self.exponent == 0 else mpq(0)
            return mpq(n) ** self.exponent
        return self.table[n % self.modulus]

    def __mul__(self, other: "CharSpec") -> "CharSpec":
        if self.kind == "power" and other.kind == "power":
            return CharSpec("power", self.exponent + other.exponent)
        m = _lcm(self._modulus_for_product(), other._modulus_for_product())
        table = tuple(self(r) * other(r) for r in range(m))
        taylor = None
        if self.has_taylor() and other.has_taylor():
            def taylor(n0, l, a=self, b=other):
                return sum((a.taylor_coeff(n0, i) * b.taylor_coeff(n0, l - i) for i in range(l + 1)), mpq(0))
        return CharSpec("tabulated", table=table, modulus=m, taylor=taylor)

    def _modulus_for_product(self) -> int:
        if self.kind == "power":
            raise ValueError("cannot multiply a power character by a tabulated one")
        return self.modulus

    def has_taylor(self) -> bool:
        return self.kind == "power" or self.taylor is not None

    def taylor_coeff(self, n0: int, l: int):
        """chi^((l))(n0): the coefficient of x^l in chi(n0 + x)."""
        if self.kind == "power":
            return binom_general(self.exponent, l) * self(n0) / mpq(n0) ** l if n0 else (
                mpq(1) if l == self.exponent else mpq(0))
        if self.taylor is None:
            raise ValueError("this character carries no Taylor data")
        return as_rational(self.taylor(n0, l))

    def at_minus_one(self):
        return self(-1)

    def __repr__(self):
        if self.kind == "power":
            return f"psi({self.exponent})"
        return f"CharSpec(tabulated mod {self.modulus})"


def psi(s: int) -> CharSpec:
    """The power character n -> n**s."""
    return CharSpec("power", s)


def _lcm(a: int, b: int) -> int:
    return int(gmpy2.lcm(a, b))


def char_weight(chi: CharSpec, p: int) -> int:
    """-v_p(chi(p)); equals s for n -> n**(-s)."""
    if chi.kind == "power":
        return -chi.exponent
    value = chi(p)
    if value == 0:
        raise ValueError("character vanishes at p; weight undefined")
    return -valuation(value, p)


def harmonic_weight(chars: Sequence[CharSpec], p: int) -> int:
    """Weight of a harmonic sum of characters: the sum of the character weights."""
    return sum(char_weight(c, p) for c in chars)


# ---------------------------------------------------------------------------
# nested sums


def _nested_sum(values: Sequence[Callable[[int], object]], indices: Iterable[int]):
    # values are ordered outermost first; one streaming pass over the indices
    d = len(values)
    acc = [mpq(1)] + [mpq(0)] * d
    for n in indices:
        for j in range(d, 0, -1):
            if acc[j - 1] != 0:
                acc[j] = acc[j] + acc[j - 1] * values[d - j](n)
    return acc[d]


def _power_fn(s: int):
    def f(n):
        if n == 0 and s > 0:
            raise ValueError("index 0 with a positive exponent")
        return mpq(1) / mpq(n) ** s if s >= 0 else mpq(n) ** (-s)
    return f


def harmonic_sum(parts: Sequence[int], N: int, lower: int = 0):
    """Sum over lower < n_1 < ... < n_d < N of prod n_i^(-s_i), exactly."""
    parts = tuple(parts)
    if not parts:
        return mpq(1)
    if lower >= N:
        return mpq(0)
    if lower < 0 < N and any(s > 0 for s in parts):
        raise ValueError("index range contains 0")
    return _nested_sum([_power_fn(s) for s in parts], range(lower + 1, N))


def harmonic_sum_char(chars: Sequence[CharSpec], N: int, lower: int = 0, exclude_multiples_of: int = None):
    """Sum of prod chi_i(n_i) over lower < n_1 < ... < n_d < N.

    With ``exclude_multiples_of = N0`` the indices divisible by N0 are skipped.
    """
    chars = tuple(chars)
    if not chars:
        return mpq(1)
    idx = range(lower + 1, N)
    if exclude_multiples_of:
        idx = [n for n in idx if n % exclude_multiples_of]
    return _nested_sum(chars, idx)


def harmonic_sum_congruent(parts: Sequence[int], N: int, p: int, k0: int, pattern: Sequence[bool], lower: int = 0):
    """Harmonic sum with n_i = n_{i-1} mod p**k0 imposed where ``pattern`` is true.

    ``pattern`` is aligned with ``parts`` (outermost first); n_0 = 0.
    """
    parts = tuple(parts)
    pattern = tuple(bool(x) for x in pattern)
    if len(pattern) != len(parts):
        raise ValueError("pattern length must equal the depth")
    d = len(parts)
    if d == 0:
        return mpq(1)
    q = p ** k0
    fns = [_power_fn(s) for s in parts]
    by_res = [dict() for _ in range(d + 1)]  # residue of last index -> partial sum
    by_res[0][0] = mpq(1)
    total = [mpq(1)] + [mpq(0)] * d
    for n in range(lower + 1, N):
        r = n % q
        for j in range(d, 0, -1):
            src = by_res[j - 1].get(r, 0) if pattern[d - j] else total[j - 1]
            if src == 0:
                continue
            term = src * fns[d - j](n)
            total[j] += term
            by_res[j][r] = by_res[j].get(r, mpq(0)) + term
    return total[d]


# ---------------------------------------------------------------------------
# power sums with Bernoulli coefficients


def bern_coeff(u: int, l: int):
    """Coefficient of N^u in sum_{0 <= n < N} n^l."""
    if u < 1 or u > l + 1:
        return mpq(0)
    return mpq(int(gmpy2.comb(l + 1, u))) * bernoulli(l + 1 - u) / (l + 1)


def tilde_poly(neg_parts: Sequence[int]) -> list:
    """Coefficients [c_0, c_1, ...] of N -> sum_{0 <= n_1 < ... < n_d < N} prod n_i^(l_i).

    ``neg_parts`` is (-l_d, ..., -l_1).
    """
    ls = [-x for x in neg_parts]
    if any(l < 0 for l in ls):
        raise ValueError("entries must be nonpositive")
    poly = [mpq(1)]  # polynomial in the next index
    for l in reversed(ls):  # innermost first
        new = [mpq(0)] * (len(poly) + l + 1)
        for k, c in enumerate(poly):
            if c == 0:
                continue
            for u in range(1, k + l + 2):
                new[u] += c * bern_coeff(u, k + l)
        poly = new
    return poly


def eval_poly(coeffs: Sequence, x):
    acc = mpq(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def tilde_harmonic(neg_parts: Sequence[int], N: int):
    """Sum over 0 <= n_1 < ... < n_d < N of prod n_i^(l_i), with 0^0 = 1."""
    return eval_poly(tilde_poly(neg_parts), N)


def bern_coeff_nested(k_d: int, ls: Sequence[int]):
    """Coefficient of N^{k_d} in the tilde power sum with exponents (l_d, ..., l_1).

    Evaluated as the nested sum over k_1, ..., k_{d-1} of products of
    ``bern_coeff`` values, innermost exponent first.
    """
    ls = tuple(ls)
    if not ls:
        return mpq(1) if k_d == 0 else mpq(0)
    inner = tuple(reversed(ls))  # l_1, ..., l_d

    @lru_cache(maxsize=None)
    def coeff(i: int, k: int):
        # coefficient of x^k after summing the innermost i+1 indices
        if i == 0:
            return bern_coeff(k, inner[0])
        total = mpq(0)
        # the inner sum is a polynomial of degree sum(l_1..l_i) + i
        for kp in range(1, sum(inner[:i]) + i + 1):
            if k > kp + inner[i] + 1:
                continue
            c = coeff(i - 1, kp)
            if c:
                total += c * bern_coeff(k, kp + inner[i])
        return total

    return coeff(len(inner) - 1, k_d)


# ---------------------------------------------------------------------------
# finite multiple zeta values


def finite_mzv(parts: Sequence[int], p: int, k: int, a: int = 0, as_: str = "exact", prec: int = None):
    """(p^k)^weight times the harmonic sum over the window (a p^k, (a+1) p^k)."""
    parts = tuple(parts)
    if not parts:
        return mpq(1) if as_ == "exact" else padic_reduce(1, p, prec or 1)
    if any(s < 1 for s in parts):
        raise ValueError("parts must be positive")
    q = p ** k
    value = mpq(q) ** sum(parts) * harmonic_sum(parts, (a + 1) * q, lower=a * q)
    if as_ == "exact":
        return value
    if as_ == "padic":
        if prec is None:
            raise ValueError("a p-adic result needs a precision")
        return PAdicApprox.from_rational(value, p, prec)
    raise ValueError(f"unknown output kind {as_!r}")


# ---------------------------------------------------------------------------
# points of the harmonic scheme


class HarPoint:
    """A family of scalars indexed by compositions; the empty composition maps to 1."""

    __slots__ = ("entries", "origin")

    def __init__(self, entries: dict, origin: str = "synthetic"):
        clean = {}
        for key, val in entries.items():
            key = parse_composition(key) if isinstance(key, str) else tuple(key)
            if key == ():
                continue
            clean[key] = val if isinstance(val, PAdicApprox) else as_rational(val)
        self.entries = clean
        self.origin = origin

    def __getitem__(self, parts):
        parts = tuple(parts)
        if not parts:
            return mpq(1)
        return self.entries[parts]

    def __contains__(self, parts):
        return tuple(parts) == () or tuple(parts) in self.entries

    def compositions(self) -> list:
        return sorted(self.entries, key=lambda c: (len(c), sum(c), c))

    def to_json(self) -> dict:
        return {
            "origin": self.origin,
            "entries": {format_composition(c): scalar_to_json(self.entries[c]) for c in self.compositions()},
        }

    @classmethod
    def from_json(cls, data: dict) -> "HarPoint":
        return cls({k: scalar_from_json(v) for k, v in data["entries"].items()}, data.get("origin", "synthetic"))

    def __repr__(self):
        body = ", ".join(f"{format_composition(c)}: {scalar_to_json(self.entries[c])}" for c in self.compositions()[:6])
        return f"HarPoint({self.origin}; {body}{', ...' if len(self.entries) > 6 else ''})"


def harmonic_point(N: int, compositions: Iterable[Sequence[int]], normalized: bool = True) -> HarPoint:
    """The point N^weight H_N (or plain H_N) on the given compositions."""
    entries = {}
    for c in compositions:
        c = tuple(c)
        val = harmonic_sum(c, N)
        entries[c] = val * mpq(N) ** sum(c) if normalized else val
    return HarPoint(entries, origin=f"H_{N}")


# ---------------------------------------------------------------------------
# weighted geometric sums


def _poly_mul(a: list, b: list) -> list:
    out = [mpq(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _poly_shift_diff(a: list) -> list:
    # P(W + 1) - P(W)
    out = [mpq(0)] * len(a)
    for i, c in enumerate(a):
        if c:
            for j in range(i):
                out[j] += c * int(gmpy2.comb(i, j))
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return out


def _poly_trim(a: list) -> list:
    a = list(a)
    while len(a) > 1 and a[-1] == 0:
        a.pop()
    return a


@dataclass(frozen=True)
class _GeomTerm:
    chain: tuple     # variables whose product U is raised to the power k
    poly: tuple      # coefficient polynomial in k
    factors: tuple   # pairs (chain_i, l_i) standing for U_i^{l_i} / (1 - U_i)^{l_i + 1}


class GeometricClosedForm:
    """sum over 0 <= w_1 < ... < w_d <= k-1 of prod X_i^{w_i} A_i(w_i), in closed form.

    Each term is C(k) * U^k * prod_i U_i^{l_i} / (1 - U_i)^{l_i + 1} where every
    U is a product of consecutive variables X_j ... X_i.
    """

    def __init__(self, terms: list, depth: int):
        self.terms = terms
        self.depth = depth

    def evaluate(self, xs: Sequence, k: int):
        xs = [as_rational(x) for x in xs]
        if len(xs) != self.depth:
            raise ValueError(f"expected {self.depth} variables")
        total = mpq(0)
        for t in self.terms:
            val = eval_poly(t.poly, k)
            if val == 0:
                continue
            val *= _chain_value(t.chain, xs) ** k
            for chain, l in t.factors:
                u = _chain_value(chain, xs)
                if u == 1:
                    raise ZeroDivisionError("pole: a variable product equals 1")
                val *= u ** l / (1 - u) ** (l + 1)
            total += val
        return total

    def variable_products(self) -> set:
        """The tuples (U_1, ..., U_d) appearing, each U given by its variable indices."""
        return {tuple(c for c, _ in t.factors) for t in self.terms}


def _chain_value(chain: tuple, xs: list):
    val = mpq(1)
    for i in chain:
        val *= xs[i]
    return val


def geometric_power_sum(weights) -> GeometricClosedForm:
    """Closed form of a weighted geometric sum.

    ``weights`` is an exponent alpha (for sum_{w<k} X^w w^alpha) or a list of
    polynomials A_1, ..., A_d given as coefficient lists, innermost first.
    """
    if isinstance(weights, int):
        if weights < 0:
            raise ValueError("exponent must be nonnegative")
        polys = [[mpq(0)] * weights + [mpq(1)]]
    else:
        polys = [[as_rational(c) for c in A] for A in weights]
    terms = [_GeomTerm((), (mpq(1),), ())]
    for i, A in enumerate(polys):
        new = []
        for t in terms:
            # sum_{w < W} U^w B(w) = G_B(0) - U^W G_B(W),
            # G_B(W) = sum_j (Delta^j B)(W) U^j / (1 - U)^{j+1}
            chain = t.chain + (i,)
            B = _poly_trim(_poly_mul(list(t.poly), A))
            j = 0
            while any(B):
                fac = t.factors + ((chain, j),)
                new.append(_GeomTerm((), (eval_poly(B, 0),), fac))
                new.append(_GeomTerm(chain, tuple(-c for c in B), fac))
                B = _poly_shift_diff(B)
                j += 1
        terms = new
    return GeometricClosedForm(terms, len(polys))
