"""Action of grouplike series on families of harmonic-sum values.

A family ``h`` indexed by compositions is acted on by a grouplike series ``g``
through the symmetrized series ``sym g = g^{-1} e1 g``.  The value at a
composition s with word W = e0^{s_d-1} e1 ... e0^{s_1-1} e1 is

    (g o h)(s) = sum over prefixes X of W and block decompositions of the rest
                 S_g(X) * prod sym g[B] * h(quotient)

where ``S_g(X) = sum_{j >= 0} sym g[e0^j e1 X]``.  The sums over j are infinite,
so every series comes with a tail bound: a lower bound on the valuation of
all sym coefficients of a given depth from a given weight on.  Truncations
are certified from that bound.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Iterable, Sequence

from gmpy2 import mpq

from .harmonic import HarPoint, compositions_up_to
from .ncseries import NCSeries, block_decompositions, composition_of_word, sym, word_from_composition
from .numkit import PAdicApprox, as_rational, valuation

__all__ = [
    "SymSource",
    "SeriesSym",
    "ScaledSym",
    "as_sym_source",
    "prefix_sum",
    "sigma_of",
    "har_act",
    "har_act_lower",
    "har_act_graded",
    "har_act_depth1",
    "har_act_depth2",
]


def _is_zero(x) -> bool:
    if isinstance(x, PAdicApprox):
        return x.is_exact_zero
    return x == 0


def _with_tail(x, absprec, p: int):
    """Attach the uncertainty O(p**absprec) to x."""
    if absprec == math.inf:
        return x
    if isinstance(x, PAdicApprox):
        return x.reduce(absprec)
    return PAdicApprox.from_rational(x, p, absprec)


class SymSource:
    """Coefficients of sym g for a fixed series g, plus a tail bound.

    Subclasses provide ``p``, ``max_weight`` (sym coefficients are available
    through this weight), ``coeff(word)`` and ``tail_bound(n, d)``, a lower
    bound on the valuation of every sym coefficient of depth d and weight at
    least n.
    """

    p: int
    max_weight: int

    def coeff(self, w: str):
        raise NotImplementedError

    def tail_bound(self, n: int, d: int):
        raise NotImplementedError


class SeriesSym(SymSource):
    """sym of a dense series known through its cap.

    ``tail_bound`` is the caller's guarantee on the sym coefficients (all
    weights from n on, depth d).  Without it no infinite sum can be certified.
    """

    def __init__(self, g: NCSeries, p: int, tail_bound: Callable[[int, int], object] = None):
        if g.cap >= 1 and (not _is_zero(g["0"]) or not _is_zero(g["1"])):
            raise ValueError("the series must vanish in weight one")
        self.p = p
        self.series = g
        self.max_weight = g.cap + 1
        self._sym = sym(g)
        self._tail = tail_bound

    def coeff(self, w: str):
        if len(w) > self.max_weight:
            raise KeyError(f"sym coefficient of weight {len(w)} beyond the cap")
        return self._sym[w]

    def tail_bound(self, n: int, d: int):
        if self._tail is None:
            raise ValueError("no valuation bound supplied, the infinite sums cannot be certified")
        return self._tail(n, d)


class ScaledSym(SymSource):
    """sym of tau(lam) g, where tau multiplies weight-n parts by lam**n."""

    def __init__(self, base: SymSource, lam):
        self.base = base
        self.p = base.p
        self.max_weight = base.max_weight
        self.lam = as_rational(lam)
        self._v = valuation(self.lam, self.p) if self.lam != 0 else math.inf
        if self._v < 0:
            raise ValueError("scaling factor must be p-integral")

    def coeff(self, w: str):
        c = self.base.coeff(w)
        if _is_zero(c):
            return c
        return c * self.lam ** (len(w) - 1)

    def tail_bound(self, n: int, d: int):
        if self._v == math.inf:
            return math.inf
        return self.base.tail_bound(n, d) + (n - 1) * self._v


def as_sym_source(g, p: int = None, tail_bound=None) -> SymSource:
    if isinstance(g, SymSource):
        return g
    if isinstance(g, NCSeries):
        if p is None:
            raise ValueError("a prime is needed to certify sums over a dense series")
        return SeriesSym(g, p, tail_bound)
    raise TypeError("expected a SymSource or an NCSeries")


def prefix_sum(src: SymSource, x: str, L_max: int = None, precision=None):
    """S(x) = sum_j sym g[e0^j e1 x], truncated and certified.

    Stops at ``L_max``, at the available weight, or once the tail bound
    reaches ``precision``, whichever comes first.  Exact when the tail bound
    is infinite.
    """
    n_x = len(x)
    d = 1 + x.count("1")
    limit = src.max_weight - 1 - n_x
    if L_max is not None:
        limit = min(limit, L_max)
    total = mpq(0)
    J = -1
    for j in range(limit + 1):
        try:
            c = src.coeff("0" * j + "1" + x)
        except KeyError:
            break
        if not _is_zero(c):
            total = c + total
        J = j
        if precision is not None and src.tail_bound(j + 2 + n_x, d) >= precision:
            break
    tail = src.tail_bound(J + 2 + n_x, d)
    return _with_tail(total, tail, src.p)


def _h_value(h, parts):
    if not parts:
        return mpq(1)
    if isinstance(h, HarPoint):
        return h[parts]
    return h(tuple(parts))


def _act_one(src: SymSource, h, parts, L_max, precision, cache, with_leading=True):
    W = word_from_composition(parts)
    total = mpq(0)
    for i in range(len(W) + 1 if with_leading else len(W)):
        X, rest = W[:i], W[i:]
        key = X
        if key not in cache:
            cache[key] = prefix_sum(src, X, L_max, precision)
        S = cache[key]
        if _is_zero(S):
            continue
        for quotient, blocks in block_decompositions(rest):
            term = S
            for b in blocks:
                if "1" not in b:
                    term = 0
                    break
                c = src.coeff(b)
                if _is_zero(c):
                    term = 0
                    break
                term = term * c
            if _is_zero(term):
                continue
            hv = _h_value(h, composition_of_word(quotient))
            if _is_zero(hv):
                continue
            total = term * hv + total
    return total


def har_act(g, h, compositions: Iterable[Sequence[int]] = None, *, p: int = None, tail_bound=None,
            L_max: int = None, precision=None) -> HarPoint:
    """g o h on the requested compositions.

    ``h`` is a HarPoint or a callable on compositions; it must be defined on
    every composition reachable as a quotient.  ``g`` is a SymSource or a
    dense series (then ``p`` and ``tail_bound`` are required).
    """
    src = as_sym_source(g, p, tail_bound)
    if compositions is None:
        if not isinstance(h, HarPoint):
            raise ValueError("compositions are required when h is a callable")
        compositions = h.compositions()
    cache = {}
    out = {}
    for parts in compositions:
        parts = tuple(parts)
        if parts:
            out[parts] = _act_one(src, h, parts, L_max, precision, cache)
    return HarPoint(out, origin="action")


def har_act_lower(g, h, parts: Sequence[int], *, p: int = None, tail_bound=None, L_max: int = None,
                  precision=None):
    """(g o h)(parts) minus its leading term sum_L sym g[e0^L e1 W(parts)].

    What remains involves only sym coefficients of depth at most the depth
    of ``parts`` and values of h below it.
    """
    src = as_sym_source(g, p, tail_bound)
    return _act_one(src, h, tuple(parts), L_max, precision, {}, with_leading=False)


def har_act_graded(g, h, s: int, compositions: Iterable[Sequence[int]] = None, *, p: int = None) -> HarPoint:
    """Coefficient of T**s in tau(T) g o h.

    Only finitely many sym coefficients contribute, so the result is exact
    for exact input.  The piece s = 0 is h itself.
    """
    src = g if isinstance(g, SymSource) else SeriesSym(g, p if p is not None else 2)
    if compositions is None:
        compositions = h.compositions()
    out = {}
    for parts in compositions:
        parts = tuple(parts)
        if not parts:
            continue
        W = word_from_composition(parts)
        total = mpq(0)
        for i in range(len(W) + 1):
            X, rest = W[:i], W[i:]
            for quotient, blocks in block_decompositions(rest):
                if any("1" not in b for b in blocks):
                    continue
                j = s - i - sum(len(b) - 1 for b in blocks)
                if j < 0:
                    continue
                term = src.coeff("0" * j + "1" + X)
                for b in blocks:
                    if _is_zero(term):
                        break
                    term = term * src.coeff(b)
                if _is_zero(term):
                    continue
                hv = _h_value(h, composition_of_word(quotient))
                if not _is_zero(hv):
                    total = term * hv + total
        out[parts] = total
    return HarPoint(out, origin=f"graded-{s}")


def sigma_of(f, max_depth: int, max_weight: int = None, *, p: int = None, tail_bound=None,
             L_max: int = None, precision=None) -> HarPoint:
    """The family s -> sum_L sym f[e0^L e1 W(s)] on compositions up to the given depth.

    Its value on the empty composition is 1.
    """
    src = as_sym_source(f, p, tail_bound)
    if max_weight is None:
        max_weight = src.max_weight - 1
    out = {}
    for parts in compositions_up_to(max_weight, max_depth):
        out[parts] = prefix_sum(src, word_from_composition(parts), L_max, precision)
    return HarPoint(out, origin="sigma")


# ---------------------------------------------------------------------------
# hand-expanded low-depth forms


def har_act_depth1(g, h, s1: int, *, p: int = None, tail_bound=None, L_max=None, precision=None):
    """(g o h)(s1) = h(s1) + sum_L sym g[e0^L e1 e0^{s1-1} e1]."""
    src = as_sym_source(g, p, tail_bound)
    return _h_value(h, (s1,)) + prefix_sum(src, "0" * (s1 - 1) + "1", L_max, precision)


def har_act_depth2(g, h, s2: int, s1: int, *, p: int = None, tail_bound=None, L_max=None, precision=None):
    """Depth-two closed form of g o h, valid for grouplike g vanishing in weight one."""
    src = as_sym_source(g, p, tail_bound)
    w1 = "0" * (s1 - 1) + "1"
    w2 = "0" * (s2 - 1) + "1"
    total = _h_value(h, (s2, s1)) + prefix_sum(src, w2 + w1, L_max, precision)
    for r2 in range(s2):
        c = src.coeff("0" * r2 + "1" + w1)
        if not _is_zero(c):
            total = total + _h_value(h, (s2 - r2,)) * c
    for r1 in range(s1):
        S = prefix_sum(src, w2 + "0" * r1, L_max, precision)
        if not _is_zero(S):
            total = total + _h_value(h, (s1 - r1,)) * S
    return total
