"""Decompositions of harmonic sums along their summation bounds.

Each identity is exposed twice: the left side evaluated straight from the
definition and the right side assembled from the decomposition.  Exact
identities return an :class:`IdentityInstance`; truncated p-adic expansions
return a :class:`Reconstruction` whose certified precision comes from explicit
valuation bounds on the discarded terms.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Sequence

from gmpy2 import mpq

from .harmonic import (
    _nested_sum,
    CharSpec,
    HarPoint,
    bern_coeff,
    finite_mzv,
    harmonic_sum,
    harmonic_sum_char,
    psi,
    tilde_harmonic,
)
from .numkit import PAdicApprox, binom_general, rational_to_str, valuation

__all__ = [
    "IdentityInstance",
    "Reconstruction",
    "reflect_bounds",
    "translate_bounds",
    "shift_finite_mzv",
    "add_bounds",
    "add_bounds_multi",
    "digit_cutpoints",
    "digit_decompose",
    "digit_expansion_depth1",
    "multiply_bounds",
    "segment_partitions",
    "multiply_bounds_padic",
    "multiply_point_padic",
    "reindex_padic",
    "finite_mzv_digit_form",
    "fermat_digit_form",
    "harness_record",
]


@dataclass
class IdentityInstance:
    """Both sides of an exact identity; unpacks as (lhs, rhs, ok)."""

    lemma: str
    params: dict
    lhs: object
    rhs: object

    @property
    def ok(self) -> bool:
        return self.lhs == self.rhs

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.ok))


# certificate of an expansion with nothing truncated
_INF_PREC = 10 ** 9


@dataclass
class Reconstruction:
    """A truncated expansion: ``partial`` is correct modulo p**certified."""

    p: int
    partial: object
    certified: int
    lemma: str = ""
    params: dict = field(default_factory=dict)

    @property
    def value(self):
        """The certified p-adic value, or the exact rational when nothing was truncated."""
        if self.certified >= _INF_PREC:
            return mpq(self.partial)
        return PAdicApprox.from_rational(self.partial, self.p, self.certified)

    def agrees_with(self, exact) -> bool:
        diff = mpq(exact) - self.partial
        return diff == 0 or valuation(diff, self.p) >= self.certified

    def __iter__(self):
        return iter((self.partial, self.certified))


def harness_record(lemma: str, params: dict, run: Callable[[], object]) -> dict:
    """Time one identity instance and return its JSON-ready record."""
    t0 = time.perf_counter()
    result = run()
    us = int((time.perf_counter() - t0) * 1_000_000)
    rec = {"lemma": lemma, "params": params}
    if isinstance(result, IdentityInstance):
        rec.update(lhs=_to_text(result.lhs), rhs=_to_text(result.rhs), equal=result.ok)
    elif isinstance(result, Reconstruction):
        exact = result.params.get("exact")
        rec.update(lhs=_to_text(exact), rhs=_to_text(result.partial), certified_prec=result.certified)
        if exact is not None:
            rec["equal"] = result.agrees_with(exact)
    else:
        raise TypeError("unsupported instance result")
    rec["runtime_us"] = us
    return rec


def _to_text(x):
    if x is None:
        return None
    if isinstance(x, PAdicApprox):
        return x.to_json()
    return rational_to_str(x)


def _chars(items) -> tuple:
    """Accept characters or integer parts s (meaning n -> n^-s)."""
    return tuple(c if isinstance(c, CharSpec) else psi(-int(c)) for c in items)


def _prod(values) -> object:
    out = mpq(1)
    for v in values:
        out *= v
    return out


# ---------------------------------------------------------------------------
# reflection and translation


def reflect_bounds(chars, M: int, N: int) -> IdentityInstance:
    """H_{M<N}(chi_d..chi_1) against the sign-twisted sum over (-N, -M) in reverse order."""
    chars = _chars(chars)
    if not 0 <= M < N:
        raise ValueError("need 0 <= M < N")
    lhs = harmonic_sum_char(chars, N, lower=M)
    sign = _prod(c(-1) for c in chars)
    rhs = sign * harmonic_sum_char(tuple(reversed(chars)), -M, lower=-N)
    return IdentityInstance("reflection", {"M": M, "N": N, "chars": [repr(c) for c in chars]}, lhs, rhs)


def _shifted(c: CharSpec, M: int) -> Callable[[int], object]:
    return lambda n: c(n + M)


def translate_bounds(chars, M: int, N: int, mode: str = "exact", L_max: int = None, p: int = None):
    """Sum over the window (M, M+N) rewritten over (0, N).

    ``exact`` compares the window sum with the shifted sum.  ``taylor``
    expands every shifted character around 1 in powers of M / n and keeps
    orders up to ``L_max``; it needs v_p(n) < v_p(M) for 0 < n < N.
    """
    chars = _chars(chars)
    if not (M >= 0 or M + N <= 0):
        raise ValueError("need M >= 0 or M + N <= 0")
    lhs = harmonic_sum_char(chars, M + N, lower=M)
    if mode == "exact":
        rhs = _nested_sum([_shifted(c, M) for c in chars], range(1, N))
        return IdentityInstance("translation", {"M": M, "N": N}, lhs, rhs)
    if mode != "taylor":
        raise ValueError(f"unknown mode {mode!r}")
    if L_max is None or p is None:
        raise ValueError("taylor mode needs L_max and p")
    if any(c.kind != "power" for c in chars):
        raise ValueError("taylor mode is implemented for power characters")
    vM = valuation(M, p) if M else None
    worst = 0
    for n in range(1, N):
        vn = valuation(n, p)
        if vM is not None and vn >= vM:
            raise ValueError(f"index n={n} has v_p(n)={vn} >= v_p(M)={vM}")
        worst = max(worst, vn)
    if M == 0:
        return Reconstruction(p, lhs, _INF_PREC, "translation-taylor", {"M": M, "N": N, "exact": lhs})
    partial = mpq(0)
    d = len(chars)
    for ls in itertools.product(range(L_max + 1), repeat=d):
        coef = _prod(mpq(M) ** l * c.taylor_coeff(1, l) for c, l in zip(chars, ls))
        if coef == 0:
            continue
        shifted = tuple(c * psi(-l) for c, l in zip(chars, ls))
        partial += coef * harmonic_sum_char(shifted, N)
    # each discarded term: v >= sum l_i (v(M) - e) - e * sum max(0, -exp_i) with e = max v_p(n) < v(M)
    neg = sum(max(0, -c.exponent) for c in chars)
    cert = (L_max + 1) * (vM - worst) - worst * neg
    return Reconstruction(p, partial, cert, "translation-taylor", {"M": M, "N": N, "exact": lhs})


def shift_finite_mzv(parts: Sequence[int], p: int, k: int, a: int, L_max: int) -> Reconstruction:
    """The window (a p^k, (a+1) p^k) rewritten through windows starting at 0.

    Sum over l of prod binom(-s_i, l_i) a^{l_i} times the base-window value at
    s + l.  Each base-window value has valuation at least its weight.
    """
    parts = tuple(parts)
    partial = mpq(0)
    for ls in itertools.product(range(L_max + 1), repeat=len(parts)):
        coef = _prod(binom_general(-s, l) * mpq(a) ** l for s, l in zip(parts, ls))
        if coef:
            partial += coef * finite_mzv(tuple(s + l for s, l in zip(parts, ls)), p, k, 0)
    va = valuation(a, p) if a else None
    cert = _INF_PREC if a == 0 else sum(parts) + (L_max + 1) * (1 + va)
    exact = finite_mzv(parts, p, k, a)
    return Reconstruction(p, partial, cert, "shift", {"parts": parts, "k": k, "a": a, "exact": exact})


# ---------------------------------------------------------------------------
# addition of upper bounds


def add_bounds(chars, N1: int, N2: int) -> IdentityInstance:
    """H_{N1+N2} split at N1: indices below, at, and above N1."""
    chars = _chars(chars)
    d = len(chars)
    lhs = harmonic_sum_char(chars, N1 + N2)
    rhs = mpq(0)
    for k in range(d + 1):
        upper = harmonic_sum_char(chars[: d - k], N1 + N2, lower=N1)
        rhs += upper * harmonic_sum_char(chars[d - k:], N1)
        if k >= 1:
            rhs += upper * chars[d - k](N1) * harmonic_sum_char(chars[d - k + 1:], N1)
    return IdentityInstance("addition", {"N1": N1, "N2": N2}, lhs, rhs)


def _cutpoint_configurations(d: int, m: int) -> Iterator[tuple]:
    # for m cutpoints: counts c_0..c_m of indices in the open windows and hit
    # flags e_1..e_m, with sum c + sum e = d
    for hits in itertools.product((0, 1), repeat=m):
        rest = d - sum(hits)
        if rest < 0:
            continue
        for cuts in itertools.combinations(range(rest + m), m):
            counts, prev = [], -1
            for c in cuts:
                counts.append(c - prev - 1)
                prev = c
            counts.append(rest + m - prev - 1)
            yield tuple(counts), hits


def add_bounds_multi(chars, N: int, cutpoints: Sequence[int]) -> IdentityInstance:
    """H_N split at several cutpoints 0 < q_1 < ... < q_m < N.

    Indices fall either strictly between consecutive cutpoints (contributing a
    window sum, 1 when the window holds no index) or on a cutpoint
    (contributing the character value there).  Cutpoints need not be hit.
    """
    chars = _chars(chars)
    qs = list(cutpoints)
    if any(not 0 < q < N for q in qs) or qs != sorted(set(qs)):
        raise ValueError("cutpoints must be strictly increasing inside [1, N-1]")
    bounds = [0] + qs + [N]
    d = len(chars)
    inner = tuple(reversed(chars))  # chi_1, ..., chi_d
    lhs = harmonic_sum_char(chars, N)
    rhs = mpq(0)
    for counts, hits in _cutpoint_configurations(d, len(qs)):
        term, pos = mpq(1), 0
        for j, c in enumerate(counts):
            block = inner[pos: pos + c]
            term *= harmonic_sum_char(tuple(reversed(block)), bounds[j + 1], lower=bounds[j])
            pos += c
            if term == 0:
                break
            if j < len(hits) and hits[j]:
                term *= inner[pos](qs[j])
                pos += 1
        rhs += term
    return IdentityInstance("addition-multi", {"N": N, "cutpoints": qs}, lhs, rhs)


# ---------------------------------------------------------------------------
# base-p digits


def _digits(N: int, p: int) -> list:
    # (exponent, digit) pairs for nonzero digits, highest exponent first
    out, y = [], 0
    while N:
        N, a = divmod(N, p)
        if a:
            out.append((y, a))
        y += 1
    return out[::-1]


def digit_cutpoints(N: int, p: int) -> list:
    """Partial sums of the base-p expansion of N, one digit unit at a time, excluding N."""
    if N < 1:
        raise ValueError("N must be positive")
    pts, acc = [], 0
    for y, a in _digits(N, p):
        for _ in range(a):
            acc += p ** y
            pts.append(acc)
    return pts[:-1]


def _window_expansion(block: tuple, q: int, y: int, p: int, L_max: int):
    # H_{q < q + p^y}(block) for power characters n -> n^-s, with v_p(q) >= y
    # returns (partial, lower bound of every term, certified absolute precision)
    s = tuple(-c.exponent for c in block)
    wt = sum(s)
    if not block:
        return mpq(1), 0, _INF_PREC
    if y == 0:
        return mpq(0), _INF_PREC, _INF_PREC
    if q == 0:
        val = harmonic_sum(s, p ** y)
        return val, -(y - 1) * wt, _INF_PREC
    partial = mpq(0)
    for ls in itertools.product(range(L_max + 1), repeat=len(s)):
        coef = _prod(mpq(q) ** l * binom_general(-si, l) for si, l in zip(s, ls))
        partial += coef * harmonic_sum(tuple(si + l for si, l in zip(s, ls)), p ** y)
    low = -(y - 1) * wt
    cert = (L_max + 1) - (y - 1) * wt
    return partial, low, cert


def digit_decompose(parts: Sequence[int], N: int, p: int, L_max: int) -> Reconstruction:
    """H_N through the digit cutpoints of N and translated windows of length p^y.

    Windows between cutpoints are expanded around their left end, giving
    harmonic sums up to powers of p; cutpoints contribute exact values.
    """
    parts = tuple(parts)
    chars = _chars(parts)
    qs = digit_cutpoints(N, p)
    bounds = [0] + qs + [N]
    lengths = [bounds[j + 1] - bounds[j] for j in range(len(bounds) - 1)]
    ys = [valuation(n, p) for n in lengths]
    inner = tuple(reversed(chars))
    d = len(chars)
    partial, cert = mpq(0), _INF_PREC
    cache = {}
    for counts, hits in _cutpoint_configurations(d, len(qs)):
        factors, pos = [], 0  # (value, lower bound, tail certificate)
        for j, c in enumerate(counts):
            block = tuple(reversed(inner[pos: pos + c]))
            key = (block, j)
            if key not in cache:
                cache[key] = _window_expansion(block, bounds[j], ys[j], p, L_max)
            factors.append(cache[key])
            pos += c
            if j < len(hits) and hits[j]:
                val = inner[pos](qs[j])
                factors.append((val, valuation(val, p), _INF_PREC))
                pos += 1
        value = _prod(f[0] for f in factors)
        if any(f[1] >= _INF_PREC for f in factors):
            continue  # an empty window with a nonempty block: exactly zero
        partial += value
        lows = [f[1] for f in factors]
        for i, f in enumerate(factors):
            if f[2] < _INF_PREC:
                cert = min(cert, f[2] + sum(lows) - lows[i])
    exact = harmonic_sum(parts, N)
    return Reconstruction(p, partial, cert, "digits", {"parts": parts, "N": N, "exact": exact})


def digit_expansion_depth1(s: int, N: int, p: int, L_max: int) -> Reconstruction:
    """Depth-one digit expansion of H_N(s) in closed form.

    Write N = a_U p^{y_U} + ... + a_1 p^{y_1}.  The cutpoints of the top digit
    give H_{a_U+1}(s) / p^{y_U s}; the cutpoints P + a' p^y of a lower digit are
    expanded in powers of P / (a' p^y); each window of length p^y starting at
    B contributes sum_l binom(-s, l) B^l H_{p^y}(s + l).
    """
    digs = _digits(N, p)
    partial, cert = mpq(0), _INF_PREC
    y_top, a_top = digs[0]
    partial += harmonic_sum((s,), a_top + 1) / mpq(p) ** (y_top * s)
    prefix = a_top * p ** y_top
    for y, a in digs[1:]:
        for l in range(L_max + 1):
            partial += (binom_general(-s, l) * mpq(prefix) ** l
                        * harmonic_sum((s + l,), a + 1) / mpq(p) ** (y * (s + l)))
        cert = min(cert, (L_max + 1) * (valuation(prefix, p) - y) - y * s)
        prefix += a * p ** y
    # running through every digit value also reaches N itself, which is not an index
    partial -= mpq(1) / mpq(N) ** s
    prefix = 0
    for y, a in digs:
        for ap in range(a if y > 0 else 0):
            B = prefix + ap * p ** y
            if B == 0:
                partial += harmonic_sum((s,), p ** y)
                continue
            for l in range(L_max + 1):
                partial += binom_general(-s, l) * mpq(B) ** l * harmonic_sum((s + l,), p ** y)
            cert = min(cert, (L_max + 1) * (valuation(B, p) - (y - 1)) - (y - 1) * s)
        prefix += a * p ** y
    exact = harmonic_sum((s,), N)
    return Reconstruction(p, partial, cert, "digits-depth1", {"s": s, "N": N, "exact": exact})


# ---------------------------------------------------------------------------
# multiplication of upper bounds


def _segments_partitions(indices: tuple) -> Iterator[tuple]:
    # ordered partitions of a run of consecutive indices into nonempty blocks
    n = len(indices)
    if n == 0:
        yield ()
        return
    for cuts in itertools.product((0, 1), repeat=n - 1):
        blocks, start = [], 0
        for i, c in enumerate(cuts):
            if c:
                blocks.append(indices[start: i + 1])
                start = i + 1
        blocks.append(indices[start:])
        yield tuple(blocks)


def segment_partitions(d: int) -> Iterator[tuple]:
    """Pairs (E, P): E a subset of 1..d, P the blocks partitioning each run between E's.

    Generated lazily in lexicographic order of E.
    """
    for mask in itertools.product((0, 1), repeat=d):
        E = tuple(i + 1 for i in range(d) if mask[i])
        runs, cur = [], []
        for i in range(1, d + 1):
            if i in E:
                runs.append(tuple(cur))
                cur = []
            else:
                cur.append(i)
        runs.append(tuple(cur))
        for choice in itertools.product(*[list(_segments_partitions(r)) for r in runs]):
            yield E, choice


def multiply_bounds(chars, N: int, M: int) -> IdentityInstance:
    """H_{NM} grouped by which indices are multiples of M and which share a window.

    Multiples of M contribute chi(nM) at n in (0, N); the other indices are
    grouped into blocks lying in a common window (qM, (q+1)M).
    """
    chars = _chars(chars)
    d = len(chars)
    lhs = harmonic_sum_char(chars, N * M)
    by_index = {i: chars[d - i] for i in range(1, d + 1)}  # chi_i
    window_cache = {}

    def window(block: tuple, q: int):
        key = (block, q)
        if key not in window_cache:
            window_cache[key] = harmonic_sum_char(tuple(by_index[i] for i in reversed(block)), (q + 1) * M, lower=q * M)
        return window_cache[key]

    rhs = mpq(0)
    for E, blocks in segment_partitions(d):
        # items in increasing order: blocks of run 0, E_1, blocks of run 1, ...
        items = []
        for t, run_blocks in enumerate(blocks):
            items.extend(("block", b) for b in run_blocks)
            if t < len(E):
                items.append(("mult", E[t]))
        # a multiple nM sits at position 2n, the window (qM, (q+1)M) at 2q + 1
        fns = []
        for kind, obj in reversed(items):
            if kind == "mult":
                c = by_index[obj]
                fns.append(lambda pos, c=c: c((pos // 2) * M) if pos % 2 == 0 and pos > 0 else 0)
            else:
                fns.append(lambda pos, b=obj: window(b, pos // 2) if pos % 2 == 1 else 0)
        rhs += _nested_sum(fns, range(1, 2 * N))
    return IdentityInstance("multiplication", {"N": N, "M": M, "d": d}, lhs, rhs)


def multiply_bounds_padic(parts: Sequence[int], N: int, p: int, k: int, L_max: int) -> Reconstruction:
    """(p^k N)^weight H_{p^k N}(parts) from sums up to N and sums up to p^k.

    Depth one uses the Bernoulli-polynomial form; depth two splits the index
    pairs by divisibility by p^k and expands each part.  Every omitted term
    has valuation at least the returned certificate.
    """
    parts = tuple(parts)
    q = p ** k
    Hq = lambda s: harmonic_sum(s, q)
    eN = max((valuation(m, p) for m in range(1, N)), default=0)
    exact = mpq(q * N) ** sum(parts) * harmonic_sum(parts, q * N)
    if len(parts) == 1:
        (s,) = parts
        total = mpq(N) ** s * harmonic_sum(parts, N)
        for L in range(1, L_max + 2):
            inner = mpq(0)
            for l in range(max(L - 1, 0), L_max + 1):
                inner += bern_coeff(L, l) * mpq(q) ** (s + l) * Hq((s + l,)) * binom_general(-s, l)
            total += mpq(N) ** (s + L) * inner
        cert = s + L_max + 1
        return Reconstruction(p, total, cert, "multiplication-padic", {"parts": parts, "N": N, "k": k, "exact": exact})
    if len(parts) != 2:
        raise ValueError("closed-form p-adic multiplication is implemented for depth 1 and 2 only")
    s2, s1 = parts
    wt = s1 + s2
    Nw = mpq(N) ** wt
    # both indices multiples of q
    total = Nw * harmonic_sum(parts, N)
    # neither index a multiple of q: different blocks, or the same block
    for l1 in range(L_max + 1):
        for l2 in range(L_max + 1):
            coef = (binom_general(-s1, l1) * binom_general(-s2, l2)
                    * mpq(q) ** (wt + l1 + l2) * Nw)
            same = tilde_harmonic((-(l1 + l2),), N) * Hq((s2 + l2, s1 + l1))
            apart = tilde_harmonic((-l2, -l1), N) * Hq((s1 + l1,)) * Hq((s2 + l2,))
            total += coef * (same + apart)
    # only the inner index a non-multiple, below q m2
    for l1 in range(L_max + 1):
        inner = sum((mpq(1) / mpq(m2) ** s2 * tilde_harmonic((-l1,), m2) for m2 in range(1, N)), mpq(0))
        total += Nw * binom_general(-s1, l1) * mpq(q) ** (s1 + l1) * Hq((s1 + l1,)) * inner
    # only the outer index a non-multiple, above q m1
    for l2 in range(L_max + 1):
        inner = sum((mpq(1) / mpq(m1) ** s1 * (tilde_harmonic((-l2,), N) - tilde_harmonic((-l2,), m1))
                     for m1 in range(1, N)), mpq(0))
        total += Nw * binom_general(-s2, l2) * mpq(q) ** (s2 + l2) * Hq((s2 + l2,)) * inner
    cert = min(wt + L_max + 1, s1 + L_max + 1 - s2 * eN, s2 + L_max + 1 - s1 * eN)
    return Reconstruction(p, total, cert, "multiplication-padic", {"parts": parts, "N": N, "k": k, "exact": exact})


def multiply_point_padic(compositions: Iterable[Sequence[int]], N: int, p: int, k: int, L_max: int) -> HarPoint:
    """The point (p^k N)^weight H_{p^k N} reconstructed on several compositions."""
    entries = {}
    for c in compositions:
        r = multiply_bounds_padic(c, N, p, k, L_max)
        entries[tuple(c)] = r.value
    return HarPoint(entries, origin=f"H_{p ** k * N} reconstructed")


# ---------------------------------------------------------------------------
# reindexing by valuation and residue


def reindex_padic(parts: Sequence[int], p: int, k: int) -> list:
    """Index tuples 0 < n_1 < ... < n_d < p^k written as n_i = p^{v_i} (p q_i + r_i).

    Returns a list of tuples ((v_1, q_1, r_1), ..., (v_d, q_d, r_d)), innermost first.
    """
    q = p ** k
    digits = []
    for n in range(1, q):
        v = valuation(n, p)
        m = n // p ** v
        digits.append((v, m // p, m % p))
    d = len(parts)
    return [tuple(digits[i - 1] for i in combo) for combo in itertools.combinations(range(1, q), d)]


def finite_mzv_digit_form(parts: Sequence[int], p: int, k: int, truncation: int) -> Reconstruction:
    """The base window value summed over the (v, q, r) reindexing.

    Each factor prod (p^{k-v})^s sum_l (p q)^l r^{-s-l} binom(-s, l) is
    truncated at l <= truncation; the omitted part has valuation at least
    weight + truncation + 1.
    """
    parts = tuple(parts)
    s_inner = tuple(reversed(parts))  # s_1, ..., s_d

    @lru_cache(maxsize=None)
    def factor(s: int, v: int, qq: int, r: int):
        acc = mpq(0)
        for l in range(truncation + 1 if qq else 1):
            acc += mpq(p * qq) ** l / mpq(r) ** (s + l) * binom_general(-s, l)
        return mpq(p) ** ((k - v) * s) * acc

    total = mpq(0)
    for idx in reindex_padic(parts, p, k):
        total += _prod(factor(s, v, qq, r) for s, (v, qq, r) in zip(s_inner, idx))
    cert = sum(parts) + truncation + 1
    exact = finite_mzv(parts, p, k, 0)
    return Reconstruction(p, total, cert, "reindex", {"parts": parts, "k": k, "exact": exact})


def fermat_digit_form(parts: Sequence[int], p: int, k: int, r: int) -> mpq:
    """The reindexed sum with n^{-s} replaced by the unit part to the power p^{r-1}(p-1) - s.

    Congruent to the base window value modulo p^r.
    """
    parts = tuple(parts)
    s_inner = tuple(reversed(parts))
    e = p ** (r - 1) * (p - 1)
    total = mpq(0)
    for idx in reindex_padic(parts, p, k):
        term = mpq(1)
        for s, (v, qq, rr) in zip(s_inner, idx):
            term *= mpq(p) ** ((k - v) * s) * mpq(p * qq + rr) ** (e - s)
        total += term
    return total
