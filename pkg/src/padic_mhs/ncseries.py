"""Truncated noncommutative power series in two letters e0, e1.

Words are strings over ``'0'`` (e0) and ``'1'`` (e1).  A series of weight cap
W stores, for every n <= W, a numpy object array of length 2**n holding the
coefficients of the weight-n words in binary order (the first letter is the
most significant bit).  Coefficients are exact rationals or
:class:`~padic_mhs.numkit.PAdicApprox` values; both kinds share every code
path below.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Iterator

import numpy as np
from gmpy2 import mpq

from .numkit import (
    PAdicApprox,
    as_rational,
    scalar_from_json,
    scalar_to_json,
    scalars_agree,
    valuation,
)

__all__ = [
    "NCSeries",
    "Check",
    "ValuationProfile",
    "word_weight",
    "word_depth",
    "word_from_composition",
    "composition_of_word",
    "words_of_weight",
    "shuffle_product",
    "series_mul",
    "series_inverse",
    "series_exp",
    "series_log",
    "tau_scale",
    "pr_weight",
    "substitute",
    "ihara_action",
    "sym",
    "sym_ihara_action",
    "sym_ihara_coefficient",
    "block_decompositions",
    "is_grouplike",
    "is_primitive",
    "recover_from_sym",
    "valuation_profile",
    "profile_combine",
    "series_agree",
]

_ZERO = mpq(0)
_ONE = mpq(1)


# ---------------------------------------------------------------------------
# words


def word_weight(w: str) -> int:
    return len(w)


def word_depth(w: str) -> int:
    return w.count("1")


def word_from_composition(parts: Iterable[int]) -> str:
    """(s_d, ..., s_1) -> e0^{s_d-1} e1 ... e0^{s_1-1} e1."""
    out = []
    for s in parts:
        if s < 1:
            raise ValueError("composition parts must be positive")
        out.append("0" * (s - 1) + "1")
    return "".join(out)


def composition_of_word(w: str) -> tuple:
    """Inverse of :func:`word_from_composition`; the word must end in e1."""
    if w and not w.endswith("1"):
        raise ValueError(f"word {w!r} does not end in e1")
    parts, run = [], 0
    for c in w:
        run += 1
        if c == "1":
            parts.append(run)
            run = 0
    return tuple(parts)


def _word_at(n: int, r: int) -> str:
    return format(r, f"0{n}b") if n else ""


def _rank(w: str) -> int:
    return int(w, 2) if w else 0


def words_of_weight(n: int) -> Iterator[str]:
    for r in range(1 << n):
        yield _word_at(n, r)


# ---------------------------------------------------------------------------
# shuffle


@lru_cache(maxsize=None)
def _shuffle_cached(u: str, v: str) -> tuple:
    if not u:
        return ((v, 1),)
    if not v:
        return ((u, 1),)
    acc: Counter = Counter()
    for w, c in _shuffle_cached(u[1:], v):
        acc[u[0] + w] += c
    for w, c in _shuffle_cached(u, v[1:]):
        acc[v[0] + w] += c
    return tuple(sorted(acc.items()))


def shuffle_product(u: str, v: str) -> Counter:
    """All interleavings of u and v, with multiplicities."""
    return Counter(dict(_shuffle_cached(u, v)))


@lru_cache(maxsize=None)
def _shuffle_table(a: int, b: int):
    # For every pair (u, v) of weights (a, b), in the order of an outer product,
    # the ranks of the words in u sh v.  Returned as (targets, starts).
    targets, starts = [], []
    for ru in range(1 << a):
        u = _word_at(a, ru)
        for rv in range(1 << b):
            v = _word_at(b, rv)
            starts.append(len(targets))
            for w, c in _shuffle_cached(u, v):
                targets.extend([_rank(w)] * c)
    return np.array(targets, dtype=np.int64), np.array(starts, dtype=np.int64)


# ---------------------------------------------------------------------------
# series


def _zeros(n: int) -> np.ndarray:
    arr = np.empty(1 << n, dtype=object)
    arr.fill(_ZERO)
    return arr


def _is_zero_array(arr: np.ndarray) -> bool:
    for x in arr:
        if isinstance(x, PAdicApprox):
            if not x.is_exact_zero:
                return False
        elif x != 0:
            return False
    return True


class NCSeries:
    """A series truncated at weight ``cap``; immutable by convention."""

    __slots__ = ("levels", "kind")

    def __init__(self, levels: list, kind: str = "rational"):
        if kind not in ("rational", "padic"):
            raise ValueError(f"unknown scalar kind {kind!r}")
        for n, arr in enumerate(levels):
            if len(arr) != 1 << n:
                raise ValueError(f"level {n} must hold {1 << n} coefficients")
        self.levels = [np.asarray(a, dtype=object) for a in levels]
        self.kind = kind

    @property
    def cap(self) -> int:
        return len(self.levels) - 1

    # constructors
    @classmethod
    def zero(cls, cap: int, kind: str = "rational") -> "NCSeries":
        return cls([_zeros(n) for n in range(cap + 1)], kind)

    @classmethod
    def one(cls, cap: int, kind: str = "rational") -> "NCSeries":
        f = cls.zero(cap, kind)
        f.levels[0][0] = _ONE
        return f

    @classmethod
    def from_dict(cls, coeffs: dict, cap: int, kind: str = "rational") -> "NCSeries":
        f = cls.zero(cap, kind)
        for w, c in coeffs.items():
            if len(w) > cap:
                continue
            if set(w) - {"0", "1"}:
                raise ValueError(f"invalid word {w!r}")
            f.levels[len(w)][_rank(w)] = c if isinstance(c, PAdicApprox) else as_rational(c)
        return f

    @classmethod
    def from_function(cls, fn: Callable[[str], object], cap: int, kind: str = "rational") -> "NCSeries":
        levels = []
        for n in range(cap + 1):
            arr = np.empty(1 << n, dtype=object)
            for r in range(1 << n):
                arr[r] = fn(_word_at(n, r))
            levels.append(arr)
        return cls(levels, kind)

    @classmethod
    def letter(cls, c: str, cap: int, coeff=1, kind: str = "rational") -> "NCSeries":
        return cls.from_dict({c: coeff}, cap, kind)

    # access
    def __getitem__(self, w: str):
        if len(w) > self.cap:
            raise KeyError(f"word {w!r} exceeds the weight cap {self.cap}")
        return self.levels[len(w)][_rank(w)]

    def items(self, nonzero: bool = True) -> Iterator:
        """(word, coefficient) pairs in weight then binary order."""
        for n, arr in enumerate(self.levels):
            for r, c in enumerate(arr):
                if nonzero and not isinstance(c, PAdicApprox) and c == 0:
                    continue
                yield _word_at(n, r), c

    def with_cap(self, cap: int) -> "NCSeries":
        if cap <= self.cap:
            return NCSeries(self.levels[: cap + 1], self.kind)
        return NCSeries(self.levels + [_zeros(n) for n in range(self.cap + 1, cap + 1)], self.kind)

    def map(self, fn: Callable) -> "NCSeries":
        return NCSeries([np.array([fn(x) for x in arr], dtype=object) for arr in self.levels], self.kind)

    # ring structure
    def _kind_with(self, other: "NCSeries") -> str:
        return "padic" if "padic" in (self.kind, other.kind) else "rational"

    def __add__(self, other: "NCSeries") -> "NCSeries":
        cap = min(self.cap, other.cap)
        return NCSeries([self.levels[n] + other.levels[n] for n in range(cap + 1)], self._kind_with(other))

    def __sub__(self, other: "NCSeries") -> "NCSeries":
        cap = min(self.cap, other.cap)
        return NCSeries([self.levels[n] - other.levels[n] for n in range(cap + 1)], self._kind_with(other))

    def __neg__(self) -> "NCSeries":
        return NCSeries([-a for a in self.levels], self.kind)

    def scale(self, c) -> "NCSeries":
        kind = "padic" if isinstance(c, PAdicApprox) else self.kind
        c = c if isinstance(c, PAdicApprox) else as_rational(c)
        return NCSeries([a * c for a in self.levels], kind)

    def __mul__(self, other):
        if isinstance(other, NCSeries):
            return series_mul(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __eq__(self, other):
        if not isinstance(other, NCSeries):
            return NotImplemented
        return bool(series_agree(self, other))

    __hash__ = None

    def __repr__(self):
        terms = [f"{scalar_to_json(c)}*[{w or '1'}]" for w, c in self.items()]
        shown = " + ".join(terms[:8]) + (" + ..." if len(terms) > 8 else "")
        return f"NCSeries(cap={self.cap}, {shown or '0'})"

    # persistence
    def to_json(self) -> dict:
        return {
            "cap": self.cap,
            "scalar": self.kind,
            "coeffs": {w: scalar_to_json(c) for w, c in self.items()},
        }

    @classmethod
    def from_json(cls, data: dict) -> "NCSeries":
        coeffs = {w: scalar_from_json(c) for w, c in data["coeffs"].items()}
        return cls.from_dict(coeffs, data["cap"], data.get("scalar", "rational"))


@dataclass(frozen=True)
class Check:
    """Outcome of a structural test; falsy on failure, with a witness."""

    ok: bool
    witness: object = None

    def __bool__(self):
        return self.ok


def series_agree(f: NCSeries, g: NCSeries) -> Check:
    """Coefficientwise agreement up to the smaller cap (certified digits for p-adic)."""
    cap = min(f.cap, g.cap)
    for n in range(cap + 1):
        for r, (a, b) in enumerate(zip(f.levels[n], g.levels[n])):
            if not scalars_agree(a, b):
                return Check(False, _word_at(n, r))
    return Check(True)


def _mul_levels(f_levels: list, g_levels: list, cap: int) -> list:
    fz = [_is_zero_array(a) for a in f_levels]
    gz = [_is_zero_array(a) for a in g_levels]
    out = []
    for n in range(cap + 1):
        acc = None
        for a in range(max(0, n - len(g_levels) + 1), min(n, len(f_levels) - 1) + 1):
            if fz[a] or gz[n - a]:
                continue
            term = np.multiply.outer(f_levels[a], g_levels[n - a]).ravel()
            acc = term if acc is None else acc + term
        out.append(_zeros(n) if acc is None else acc)
    return out


def series_mul(f: NCSeries, g: NCSeries) -> NCSeries:
    """Concatenation product, truncated at the smaller cap."""
    cap = min(f.cap, g.cap)
    return NCSeries(_mul_levels(f.levels, g.levels, cap), f._kind_with(g))


def _unit_inverse(c):
    if isinstance(c, PAdicApprox):
        if c.is_zero:
            raise ZeroDivisionError("non-unit constant term")
        return 1 / c
    if c == 0:
        raise ZeroDivisionError("non-unit constant term")
    return 1 / c


def series_inverse(f: NCSeries) -> NCSeries:
    """Multiplicative inverse; the constant term must be invertible."""
    c0 = _unit_inverse(f.levels[0][0])
    inv = [np.array([c0], dtype=object)]
    for n in range(1, f.cap + 1):
        acc = _zeros(n)
        for a in range(1, n + 1):
            acc = acc + np.multiply.outer(f.levels[a], inv[n - a]).ravel()
        inv.append(-(acc * c0))
    return NCSeries(inv, f.kind)


def series_exp(f: NCSeries) -> NCSeries:
    """exp(f) for a series without constant term."""
    if not scalars_agree(f.levels[0][0], 0):
        raise ValueError("exp needs a series with zero constant term")
    result = NCSeries.one(f.cap, f.kind)
    power = NCSeries.one(f.cap, f.kind)
    for k in range(1, f.cap + 1):
        power = series_mul(power, f).scale(mpq(1, k))
        result = result + power
    return result


def series_log(f: NCSeries) -> NCSeries:
    """log(f) for a series with constant term 1."""
    if not scalars_agree(f.levels[0][0], 1):
        raise ValueError("log needs a series with constant term 1")
    x = f - NCSeries.one(f.cap, f.kind)
    result = NCSeries.zero(f.cap, f.kind)
    power = NCSeries.one(f.cap, f.kind)
    for k in range(1, f.cap + 1):
        power = series_mul(power, x)
        result = result + power.scale(mpq((-1) ** (k + 1), k))
    return result


def tau_scale(f: NCSeries, lam) -> NCSeries:
    """Multiply each weight-n coefficient by lam**n."""
    lam = lam if isinstance(lam, PAdicApprox) else as_rational(lam)
    levels, power = [], _ONE
    for arr in f.levels:
        levels.append(arr * power)
        power = power * lam
    kind = "padic" if isinstance(lam, PAdicApprox) else f.kind
    return NCSeries(levels, kind)


def pr_weight(f: NCSeries, s: int) -> NCSeries:
    """Keep only the weight-s part."""
    return NCSeries([arr.copy() if n == s else _zeros(n) for n, arr in enumerate(f.levels)], f.kind)


# ---------------------------------------------------------------------------
# substitution and the Ihara action


def _substitute_levels(f_levels: list, s_levels: list, cap: int) -> list:
    # f(e0, S) with S[empty] = 0, split on the first letter:
    #   f = c + e0 f_0 + e1 f_1  ->  c + e0 f_0(e0, S) + S f_1(e0, S)
    out = [_zeros(n) for n in range(cap + 1)]
    out[0][0] = f_levels[0][0]
    top = min(len(f_levels) - 1, cap)
    if top == 0 or all(_is_zero_array(a) for a in f_levels[1: top + 1]):
        return out
    f0 = [f_levels[m + 1][: 1 << m] for m in range(top)]
    f1 = [f_levels[m + 1][1 << m:] for m in range(top)]
    if not all(_is_zero_array(a) for a in f0):
        t0 = _substitute_levels(f0, s_levels, cap - 1)
        for n in range(cap):
            out[n + 1] = out[n + 1] + np.concatenate([t0[n], _zeros(n)])
    if not all(_is_zero_array(a) for a in f1):
        t1 = _substitute_levels(f1, s_levels, cap - 1)
        prod = _mul_levels(s_levels, t1, cap)
        for n in range(1, cap + 1):
            out[n] = out[n] + prod[n]
    return out


def substitute(f: NCSeries, s: NCSeries) -> NCSeries:
    """f(e0, S): every e1 in every word of f is replaced by the series S."""
    if not scalars_agree(s.levels[0][0], 0):
        raise ValueError("the substituted series must have zero constant term")
    cap = min(f.cap, s.cap)
    return NCSeries(_substitute_levels(f.levels, s.levels, cap), f._kind_with(s))


def _e1_times(f: NCSeries, cap: int) -> NCSeries:
    levels = [_zeros(0)]
    for n in range(cap):
        src = f.levels[n] if n <= f.cap else _zeros(n)
        levels.append(np.concatenate([_zeros(n), src]))
    return NCSeries(levels, f.kind)


def sym(f: NCSeries) -> NCSeries:
    """f^{-1} e1 f.  The result is known one weight beyond the cap of f."""
    cap = f.cap + 1
    inv = series_inverse(f).with_cap(cap)
    return series_mul(inv, _e1_times(f, cap))


def ihara_action(g: NCSeries, f: NCSeries) -> NCSeries:
    """g o f = g . f(e0, g^{-1} e1 g)."""
    cap = min(g.cap, f.cap)
    g = g.with_cap(cap)
    s = sym(g).with_cap(cap)
    return series_mul(g, substitute(f.with_cap(cap), s))


def sym_ihara_action(h2: NCSeries, h1: NCSeries) -> NCSeries:
    """h1(e0, h2), the action induced on symmetrized series."""
    return substitute(h1, h2)


def block_decompositions(w: str) -> Iterator[tuple]:
    """Ways to mark disjoint consecutive blocks of w covering every e1.

    Letters outside the blocks are e0.  Yields ``(quotient, blocks)`` where the
    quotient replaces each block by a single e1; adjacent blocks stay separate.
    """
    yield from _block_decompositions(w)


@lru_cache(maxsize=None)
def _block_decompositions(w: str) -> tuple:
    n = len(w)

    def rec(i):
        if i == n:
            yield "", ()
            return
        if w[i] == "0":
            for q, b in rec(i + 1):
                yield "0" + q, b
        for j in range(i + 1, n + 1):
            block = w[i:j]
            for q, b in rec(j):
                yield "1" + q, (block,) + b

    return tuple(rec(0))


def sym_ihara_coefficient(h2: NCSeries, h1: NCSeries, w: str):
    """Coefficient of w in h1(e0, h2), evaluated block by block."""
    total = _ZERO
    for quotient, blocks in block_decompositions(w):
        term = h1[quotient]
        if not isinstance(term, PAdicApprox) and term == 0:
            continue
        for b in blocks:
            term = term * h2[b]
        total = total + term
    return total


# ---------------------------------------------------------------------------
# shuffle structure of a series


def _pairing_check(f: NCSeries, expect_product: bool, include_empty: bool) -> Check:
    cap = f.cap
    for n in range(1, cap + 1):
        for a in range(1, n // 2 + 1):
            b = n - a
            targets, starts = _shuffle_table(a, b)
            sums = np.add.reduceat(f.levels[n][targets], starts)
            if expect_product:
                rhs = np.multiply.outer(f.levels[a], f.levels[b]).ravel()
            else:
                rhs = None
            for idx in range(len(sums)):
                other = rhs[idx] if rhs is not None else _ZERO
                if not scalars_agree(sums[idx], other):
                    ru, rv = divmod(idx, 1 << b)
                    return Check(False, (_word_at(a, ru), _word_at(b, rv)))
    return Check(True)


def is_grouplike(f: NCSeries) -> Check:
    """f[empty] = 1 and f[u sh v] = f[u] f[v] for all u, v within the cap."""
    if not scalars_agree(f.levels[0][0], 1):
        return Check(False, ("", ""))
    return _pairing_check(f, True, False)


def is_primitive(f: NCSeries) -> Check:
    """f[empty] = 0 and f vanishes on every shuffle of two nonempty words."""
    if not scalars_agree(f.levels[0][0], 0):
        return Check(False, ("", ""))
    return _pairing_check(f, False, False)


def recover_from_sym(h: NCSeries) -> NCSeries:
    """The grouplike f with f[e0] = f[e1] = 0 and sym(f) = h, up to cap h.cap - 1.

    Works weight by weight: the new weight-n part of f enters sym(f) at weight
    n + 1 only through e1 f_n - f_n e1, which is inverted letter by letter.
    """
    cap = h.cap - 1
    kind = h.kind
    f = NCSeries.one(cap, kind)
    for n in range(1, cap + 1):
        if n == 1:
            continue
        known = sym(f.with_cap(n)).levels[n + 1]
        rest = h.levels[n + 1] - known
        fn = _zeros(n)
        # f[x e1^j] = R[e1 x e1^j] + f[e1 x e1^{j-1}], ending at words not ending in e1
        for r in range(1 << n):
            v = _word_at(n, r)
            if "0" not in v:
                continue  # e1^n: zero for a grouplike series with f[e1] = 0
            fn[r] = _solve_commutator(v, rest, n)
        f.levels[n] = fn
    return f


def _solve_commutator(v: str, rest: np.ndarray, n: int):
    value = _ZERO
    word = v
    while True:
        value = value + rest[_rank("1" + word)]
        if not word.endswith("1"):
            return value
        word = "1" + word[:-1]


# ---------------------------------------------------------------------------
# valuation profiles


class ValuationProfile(dict):
    """Lower bounds on coefficient valuations keyed by (weight, depth).

    Missing keys read as +infinity.
    """

    def __missing__(self, key):
        return math.inf

    def dominates(self, other: "ValuationProfile") -> Check:
        """self >= other entrywise."""
        for key in set(self) | set(other):
            if self[key] < other[key]:
                return Check(False, key)
        return Check(True)

    def cap(self) -> int:
        return max((n for n, _ in self), default=0)


def _scalar_valuation(x, p):
    if isinstance(x, PAdicApprox):
        return x.valuation_lower_bound()
    v = valuation(x, p) if p is not None else (None if x == 0 else 0)
    return math.inf if v is None else v


def valuation_profile(f: NCSeries, p: int = None) -> ValuationProfile:
    """Observed minimum valuation per (weight, depth).

    For rational series the prime must be given; p-adic coefficients use the
    certified lower bound of each approximation.
    """
    prof = ValuationProfile()
    for n, arr in enumerate(f.levels):
        for r, x in enumerate(arr):
            v = _scalar_valuation(x, p)
            if v == math.inf:
                continue
            key = (n, bin(r).count("1"))
            if v < prof[key]:
                prof[key] = v
    return prof


def _minplus(a: dict, b: dict, cap: int, shift=(0, 0)) -> ValuationProfile:
    out = ValuationProfile()
    for (n1, d1), v1 in a.items():
        for (n2, d2), v2 in b.items():
            n, d = n1 + n2 + shift[0], d1 + d2 + shift[1]
            if n > cap:
                continue
            if v1 + v2 < out[(n, d)]:
                out[(n, d)] = v1 + v2
    return out


def _inverse_profile(a: dict, cap: int) -> ValuationProfile:
    c0 = a[(0, 0)]
    if c0 == math.inf:
        raise ZeroDivisionError("non-unit constant term")
    out = ValuationProfile({(0, 0): -c0})
    higher = {k: v for k, v in a.items() if k != (0, 0) and v < math.inf}
    for n in range(1, cap + 1):
        for (n1, d1), v1 in higher.items():
            if n1 > n:
                continue
            for (m, e), w in list(out.items()):
                if m == n - n1:
                    key = (n, d1 + e)
                    val = -c0 + v1 + w
                    if val < out[key]:
                        out[key] = val
    return out


def _substitution_profile(f_prof: dict, s_prof: dict, cap: int) -> ValuationProfile:
    # word of f with m letters, k of them e1: e0's stay, each e1 becomes an S-word
    powers = [ValuationProfile({(0, 0): 0})]
    out = ValuationProfile()
    for (m, k), v in sorted(f_prof.items()):
        while len(powers) <= k:
            powers.append(_minplus(powers[-1], s_prof, cap))
        for (n2, d2), w in powers[k].items():
            n = (m - k) + n2
            if n > cap:
                continue
            if v + w < out[(n, d2)]:
                out[(n, d2)] = v + w
    return out


def profile_combine(a: dict, b: dict, mode: str = "product", cap: int = None) -> ValuationProfile:
    """Sound lower bound for the profile of a combination of two series.

    ``product``: profile of g.f from (g, f).  ``ihara``: profile of g o f from
    (g, f).  ``sym_ihara``: profile of h1(e0, h2) from (h2, h1).
    """
    a = ValuationProfile(a)
    b = ValuationProfile(b)
    if cap is None:
        cap = max(a.cap(), b.cap())
    if mode == "product":
        return _minplus(a, b, cap)
    if mode == "sym_ihara":
        return _substitution_profile(b, a, cap)
    if mode == "ihara":
        inv = _inverse_profile(a, cap)
        s = _minplus(inv, a, cap, shift=(1, 1))
        return _minplus(a, _substitution_profile(b, s, cap), cap)
    raise ValueError(f"unknown combine mode {mode!r}")
