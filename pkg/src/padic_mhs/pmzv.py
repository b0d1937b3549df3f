"""p-adic multiple zeta values recovered from multiple harmonic sums.

For every N, acting with tau(N) Phi on the family N^weight H_N gives the
family (p^k N)^weight H_{p^k N}, where Phi = Phi_{p^-k} is the Frobenius
series.  The unknown coefficients of Phi enter these identities linearly, so
they are solved exactly over the rationals from the first few N and then
reduced p-adically.  The certified precision of each output combines the
exact valuations of the inverse matrix with a lower bound on the valuation
of the discarded high-weight coefficients.

Only the depth-one and depth-two parts of the series are represented.
Words are strings over '0' (e0) and '1' (e1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Iterable, Sequence

from gmpy2 import mpq

from .harmonic import (
    HarPoint,
    bern_coeff,
    compositions_up_to,
    finite_mzv,
    format_composition,
    harmonic_sum,
)
from .haraction import SymSource, ScaledSym, har_act, har_act_graded, har_act_lower, prefix_sum
from .ncseries import NCSeries, shuffle_product, word_from_composition
from .numkit import PAdicApprox, scalar_from_json, scalar_to_json, valuation

__all__ = [
    "PrecisionShortfall",
    "coefficient_bound",
    "coefficient_tail",
    "sym_tail",
    "PhiApprox",
    "ihara_product",
    "ihara_inverse",
    "tau",
    "frobenius_iterate",
    "certified_solve",
    "solve_depth1",
    "solve_depth2",
    "recover_depth2",
    "build_phi",
    "verify_theorem1",
    "phi_infinity_approx",
    "fixed_point_residual",
    "taylor_coefficients",
    "depth1_taylor_geometric",
    "depth1_taylor_elementary",
    "verify_theorem2",
    "verify_yasuda_hirose",
    "zeta_f_negative",
    "check_grouplike",
    "even_weight_vanishing",
]

_INF = math.inf


class PrecisionShortfall(ArithmeticError):
    """The requested precision cannot be certified with the configured caps."""


def _is_zero(x) -> bool:
    if isinstance(x, PAdicApprox):
        return x.is_exact_zero
    return x == 0


def _absprec(x):
    return x.absprec if isinstance(x, PAdicApprox) else _INF


# ---------------------------------------------------------------------------
# valuation bounds


@lru_cache(maxsize=None)
def coefficient_bound(n: int, d: int, p: int):
    """Lower bound on v_p of a Frobenius-series coefficient of weight n, depth d.

    n - (2d log_p(2dn) - d + 1), rounded to an integer certificate: with c the
    least integer such that p^c >= (2dn)^(2d), every such coefficient has
    valuation at least n + d - 1 - c.  The word e1^d has coefficient 0.
    """
    if d == 0:
        return 0 if n == 0 else _INF
    if n < d:
        raise ValueError("weight below depth")
    if n == d:
        return _INF
    target = (2 * d * n) ** (2 * d)
    c, pc = 0, 1
    while pc < target:
        pc *= p
        c += 1
    return n + d - 1 - c


@lru_cache(maxsize=None)
def coefficient_tail(n: int, d: int, p: int):
    """Lower bound valid for every coefficient of depth d and weight at least n."""
    if d == 0:
        return 0 if n <= 0 else _INF
    lo = max(n, d)
    # the bound is non-decreasing in the weight from 3d on
    return min(coefficient_bound(m, d, p) for m in range(lo, max(lo, 3 * d) + 1))


@lru_cache(maxsize=None)
def sym_tail(n: int, d: int, p: int):
    """Lower bound for every coefficient of Phi^{-1} e1 Phi of depth d and weight at least n.

    Each such coefficient is a sum over splits u e1 v of Phi^{-1}[u] Phi[v].
    """
    best = _INF
    for du in range(d):
        for a in range(0, max(n - 1, 0) + 1):
            b = max(n - 1 - a, 0)
            best = min(best, coefficient_tail(a, du, p) + coefficient_tail(b, d - 1 - du, p))
    return best


# ---------------------------------------------------------------------------
# the depth-capped series


def _word1(m: int) -> str:
    return "0" * (m - 1) + "1"


def _word2(a: int, b: int) -> str:
    return "0" * a + "1" + "0" * b + "1"


class PhiApprox(SymSource):
    """Depth-one and depth-two coefficients of a Frobenius series.

    ``z1[m]`` is the coefficient of e0^{m-1} e1 and ``z2[(a, b)]`` that of
    e0^a e1 e0^b e1.  Every other coefficient of depth at most two follows
    from these by the shuffle relations with a vanishing e0 coefficient.
    ``brackets[(L, s2, s1)]`` optionally holds solved values of
    (Phi^{-1} e1 Phi)[e0^L e1 e0^{s2-1} e1 e0^{s1-1} e1].
    """

    def __init__(self, p: int, which: str, z1: dict, z2: dict = None, brackets: dict = None,
                 record: dict = None):
        self.p = p
        self.which = which
        self.z1 = {int(m): v for m, v in z1.items() if m >= 2}
        self.z2 = {tuple(k): v for k, v in (z2 or {}).items()}
        self.brackets = {tuple(k): v for k, v in (brackets or {}).items()}
        self.record = dict(record or {})
        self.max_weight = max(self.z1, default=1) + 1
        self._sym_cache = {}

    # -- structure
    @property
    def max_depth(self) -> int:
        return 2 if (self.z2 or self.brackets) else 1

    def weight_cap(self, depth: int) -> int:
        if depth == 1:
            return max(self.z1, default=1)
        if depth == 2:
            return max((a + b + 2 for a, b in self.z2), default=1)
        return 0

    def _z1(self, m: int):
        if m == 1:
            return mpq(0)
        return self.z1[m]

    def _z2(self, a: int, b: int):
        if a == 0 and b == 0:
            return mpq(0)
        return self.z2[(a, b)]

    def _d1(self, a: int, c: int):
        """Coefficient of e0^a e1 e0^c."""
        val = self._z1(a + c + 1)
        if _is_zero(val):
            return mpq(0)
        return val * ((-1) ** c * comb(a + c, c))

    def _d2(self, a: int, b: int, c: int):
        """Coefficient of e0^a e1 e0^b e1 e0^c."""
        total = mpq(0)
        for i in range(c + 1):
            val = self._z2(a + i, b + c - i)
            if not _is_zero(val):
                total = val * (comb(a + i, i) * comb(b + c - i, c - i)) + total
        return total if c % 2 == 0 else -total

    # -- coefficients
    def phi(self, w: str):
        """Coefficient of the word w in the series."""
        ones = [i for i, ch in enumerate(w) if ch == "1"]
        if not ones:
            return mpq(1) if not w else mpq(0)
        if len(ones) == 1:
            return self._d1(ones[0], len(w) - 1 - ones[0])
        if len(ones) == 2:
            i, j = ones
            return self._d2(i, j - i - 1, len(w) - 1 - j)
        raise KeyError(f"depth {len(ones)} coefficients are not represented")

    def phi_inverse(self, w: str):
        """Coefficient of w in the inverse series (antipode of a grouplike series)."""
        c = self.phi(w[::-1])
        return -c if len(w) % 2 else c

    def coeff(self, w: str):
        """Coefficient of w in Phi^{-1} e1 Phi."""
        hit = self._sym_cache.get(w)
        if hit is not None:
            return hit
        if w.count("1") == 3 and w.endswith("1"):
            key = _bracket_key(w)
            if key in self.brackets:
                self._sym_cache[w] = self.brackets[key]
                return self.brackets[key]
        total = mpq(0)
        for i, ch in enumerate(w):
            if ch != "1":
                continue
            right = self.phi(w[i + 1:])
            if _is_zero(right):
                continue
            left = self.phi_inverse(w[:i])
            if _is_zero(left):
                continue
            total = left * right + total
        self._sym_cache[w] = total
        return total

    def tail_bound(self, n: int, d: int):
        return sym_tail(n, d, self.p)

    def zeta(self, parts: Sequence[int]):
        """(-1)^depth times the coefficient of the composition word."""
        parts = tuple(parts)
        if not parts:
            return mpq(1)
        c = self.phi(word_from_composition(parts))
        return -c if len(parts) % 2 else c

    def certificates(self) -> dict:
        out = {}
        for m, v in self.z1.items():
            out[_word1(m)] = _absprec(v)
        for (a, b), v in self.z2.items():
            out[_word2(a, b)] = _absprec(v)
        return out

    def to_series(self, cap: int) -> NCSeries:
        """Dense series through ``cap`` with every coefficient of depth above two set to 0."""
        def fn(w):
            if w.count("1") > 2:
                return mpq(0)
            return self.phi(w)
        return NCSeries.from_function(fn, cap, kind="padic")

    # -- persistence
    def to_json(self) -> dict:
        coeffs = {}
        for m in sorted(self.z1):
            coeffs[_word1(m)] = scalar_to_json(self.z1[m])
        for a, b in sorted(self.z2, key=lambda k: (k[0] + k[1], k)):
            coeffs[_word2(a, b)] = scalar_to_json(self.z2[(a, b)])
        certs = {w: (None if c == _INF else int(c)) for w, c in self.certificates().items()}
        return {
            "cap": max(self.weight_cap(1), self.weight_cap(2)),
            "scalar": "padic",
            "coeffs": coeffs,
            "which": self.which,
            "p": self.p,
            "certificates": certs,
            "brackets": {f"{L}|{s2},{s1}": scalar_to_json(v) for (L, s2, s1), v in sorted(self.brackets.items())},
            "record": self.record,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PhiApprox":
        z1, z2 = {}, {}
        for w, c in data["coeffs"].items():
            ones = [i for i, ch in enumerate(w) if ch == "1"]
            val = scalar_from_json(c)
            if len(ones) == 1:
                z1[len(w)] = val
            elif len(ones) == 2:
                z2[(ones[0], ones[1] - ones[0] - 1)] = val
        brackets = {}
        for key, c in data.get("brackets", {}).items():
            L, comp = key.split("|")
            s2, s1 = comp.split(",")
            brackets[(int(L), int(s2), int(s1))] = scalar_from_json(c)
        return cls(data["p"], data["which"], z1, z2, brackets, data.get("record"))

    def __repr__(self):
        return (f"PhiApprox({self.which}, p={self.p}, depth1<= {self.weight_cap(1)}, "
                f"depth2<= {self.weight_cap(2)}, brackets={len(self.brackets)})")


def _bracket_key(w: str):
    """(L, s2, s1) for the word e0^L e1 e0^{s2-1} e1 e0^{s1-1} e1."""
    ones = [i for i, ch in enumerate(w) if ch == "1"]
    return ones[0], ones[1] - ones[0], ones[2] - ones[1]


# ---------------------------------------------------------------------------
# Ihara products in depth at most two


def _cross(g: PhiApprox, f: PhiApprox, a: int, b: int):
    """Depth-two coefficient of g o f produced by the depth-one parts of g and f."""
    total = mpq(0)
    for i in range(b + 1):
        x, y = g._d1(a, i), f._d1(b - i, 0)
        if not (_is_zero(x) or _is_zero(y)):
            total = x * y + total
    x, y = f._d1(a, 0), g._d1(b, 0)
    if not (_is_zero(x) or _is_zero(y)):
        total = x * y + total
    for al in range(a + 1):
        x, y = f._d1(al, 0), g._d1(a - al, b)
        if not (_is_zero(x) or _is_zero(y)):
            total = total - x * y
    return total


def ihara_product(g: PhiApprox, f: PhiApprox, which: str = None) -> PhiApprox:
    """g o f = g . f(e0, g^{-1} e1 g), in depth at most two."""
    if g.p != f.p:
        raise ValueError("different primes")
    w1 = min(g.weight_cap(1), f.weight_cap(1))
    z1 = {m: g._z1(m) + f._z1(m) for m in range(2, w1 + 1)}
    z2 = {}
    if g.z2 and f.z2:
        w2 = min(g.weight_cap(2), f.weight_cap(2), w1)
        for m in range(2, w2 + 1):
            for a in range(m - 1):
                b = m - 2 - a
                z2[(a, b)] = g._z2(a, b) + f._z2(a, b) + _cross(g, f, a, b)
    return PhiApprox(g.p, which or f"({g.which})o({f.which})", z1, z2)


def ihara_inverse(f: PhiApprox, which: str = None) -> PhiApprox:
    """The inverse for the Ihara product, in depth at most two."""
    z1 = {m: -v for m, v in f.z1.items()}
    g = PhiApprox(f.p, which or f"inverse({f.which})", z1)
    z2 = {}
    for (a, b), v in f.z2.items():
        if a + b + 2 <= f.weight_cap(1):
            z2[(a, b)] = -v - _cross(g, f, a, b)
    g.z2 = z2
    return g


def tau(f: PhiApprox, lam, which: str = None) -> PhiApprox:
    """Multiply every weight-n coefficient by lam**n."""
    lam = mpq(lam)
    z1 = {m: v * lam ** m for m, v in f.z1.items()}
    z2 = {(a, b): v * lam ** (a + b + 2) for (a, b), v in f.z2.items()}
    return PhiApprox(f.p, which or f"tau({lam}){f.which}", z1, z2)


def frobenius_iterate(phi_m1: PhiApprox, k: int) -> PhiApprox:
    """tau(p^{k-1}) Phi o ... o tau(p) Phi o Phi for Phi = Phi_{p^-1}."""
    p = phi_m1.p
    cur = phi_m1
    for j in range(1, k):
        cur = ihara_product(tau(phi_m1, p ** j), cur)
    cur.which = f"p^-{k}"
    return cur


# ---------------------------------------------------------------------------
# exact linear algebra with p-adic pivoting


@dataclass
class SolveResult:
    values: list
    certified: list
    pivot_rows: list
    residual_ok: bool
    params: dict = field(default_factory=dict)


def certified_solve(A: list, b: list, tails: list, p: int) -> SolveResult:
    """Solve A x = b + e exactly, where e_j has valuation at least tails[j].

    Rows are chosen by p-adic pivoting (least valuation first); the certified
    precision of x_i is min_j v((A_S^{-1})_{ij}) + tails[j] over the chosen
    rows S.  Unused rows are checked for consistency at their own precision.
    """
    m, n = len(A), len(A[0])
    if m < n:
        raise ValueError(f"{m} equations for {n} unknowns")
    R = [[mpq(x) for x in row] + [mpq(1) if i == j else mpq(0) for j in range(m)] for i, row in enumerate(A)]
    used, pivots = set(), []
    for c in range(n):
        best = None
        for r in range(m):
            if r in used or R[r][c] == 0:
                continue
            v = valuation(R[r][c], p)
            if best is None or v < best[0]:
                best = (v, r)
        if best is None:
            raise ArithmeticError(f"singular system at unknown {c}")
        r = best[1]
        used.add(r)
        pivots.append(r)
        pv = R[r][c]
        R[r] = [x / pv for x in R[r]]
        prow = R[r]
        for r2 in range(m):
            if r2 != r and R[r2][c] != 0:
                f = R[r2][c]
                R[r2] = [x - f * y for x, y in zip(R[r2], prow)]
    values, certs = [], []
    for r in pivots:
        T = R[r][n:]
        values.append(sum((t * bb for t, bb in zip(T, b) if t != 0), mpq(0)))
        certs.append(min((valuation(t, p) + tl for t, tl in zip(T, tails) if t != 0), default=_INF))
    ok = True
    for r in range(m):
        if r in used:
            continue
        T = R[r][n:]
        res = sum((t * bb for t, bb in zip(T, b) if t != 0), mpq(0))
        bound = min((valuation(t, p) + tl for t, tl in zip(T, tails) if t != 0), default=_INF)
        if res != 0 and valuation(res, p) < bound:
            ok = False
    return SolveResult(values, certs, pivots, ok)


def _padic(x, p: int, cert, bound=None):
    """x known modulo p^cert, sharpened by an a priori valuation bound.

    When the true value is known to have valuation at least ``bound`` and the
    solved digits are consistent with that, the value is O(p^bound).
    """
    if cert == _INF:
        return x
    cert = int(cert)
    if bound is not None and bound > cert:
        if x != 0 and valuation(x, p) < cert:
            raise ArithmeticError("solved value contradicts the valuation bound")
        return PAdicApprox.zero(p, int(bound)) if bound != _INF else mpq(0)
    return PAdicApprox.from_rational(x, p, cert)


# ---------------------------------------------------------------------------
# depth one


_MAX_TRUNCATION = 200


def _depth1_coef(s: int, L: int) -> int:
    if L == 0:
        return 1 + (-1) ** s
    return (-1) ** s * comb(s + L - 1, L)


def _solve_depth1_once(p, k, s, L_max, M, rows=None):
    Ls = [L for L in range(L_max + 1) if _depth1_coef(s, L) != 0]
    if rows is None:
        if M is None:
            M = len(Ls)
        rows = list(range(1, M + 1))
    q = p ** k
    A, b, tails = [], [], []
    tail = coefficient_tail(s + L_max + 1, 1, p)
    for N in rows:
        A.append([mpq(N) ** (s + L) * _depth1_coef(s, L) for L in Ls])
        b.append(mpq(q * N) ** s * harmonic_sum((s,), q * N) - mpq(N) ** s * harmonic_sum((s,), N))
        tails.append(tail)
    res = certified_solve(A, b, tails, p)
    res.params = {"s": s, "L_max": L_max, "M": len(rows), "rows": rows, "tail": tail}
    return Ls, res


def solve_depth1(p: int, k: int = 1, max_weight: int = 8, precision: int = 5, *, s: int = 1,
                 L_max: int = None, M: int = None, rows: Sequence[int] = None, scale: int = 1) -> PhiApprox:
    """Depth-one coefficients of Phi_{p^-k} from the values H_{p^k N}(s), N = 1..M.

    The relation for N reads
        (p^k N)^s H_{p^k N}(s) - N^s H_N(s) = sum_L N^{s+L} c_L Phi[e0^{s+L-1} e1]
    with c_0 = 1 + (-1)^s and c_L = (-1)^s binom(s+L-1, L).  Unknowns with
    L <= L_max are kept; the rest is the certified tail.  Without explicit
    caps, L_max grows until every weight up to ``max_weight`` is certified to
    ``precision``.
    """
    if s < 1:
        raise ValueError("s must be positive")
    auto = L_max is None
    if auto:
        L_max = max(max_weight - s, 2) + 8
    while True:
        Ls, res = _solve_depth1_once(p, k, s, L_max, M, rows)
        if not res.residual_ok:
            raise ArithmeticError("inconsistent depth-one system: the valuation bound failed")
        z1 = {}
        for L, x, cert in zip(Ls, res.values, res.certified):
            z1[s + L] = _padic(x, p, cert, coefficient_bound(s + L, 1, p) if s + L >= 2 else None)
        short = [m for m in range(max(s, 2), max_weight + 1) if m in z1 and _absprec(z1[m]) < precision]
        if not short:
            break
        if not auto or L_max >= _MAX_TRUNCATION:
            raise PrecisionShortfall(
                f"depth one: weights {short} below p^{precision} with L_max={L_max}, M={res.params['M']}")
        L_max += 8
    if scale > 1:
        L_max, M = L_max * scale, res.params["M"] * scale
        Ls, res = _solve_depth1_once(p, k, s, L_max, M, None)
        if not res.residual_ok:
            raise ArithmeticError("inconsistent depth-one system: the valuation bound failed")
        z1 = {s + L: _padic(x, p, cert, coefficient_bound(s + L, 1, p) if s + L >= 2 else None)
              for L, x, cert in zip(Ls, res.values, res.certified)}
    record = {"relations": "depth-one harmonic", "k": k, "s": s, "L_max": L_max, "M": res.params["M"],
              "tail": res.params["tail"]}
    return PhiApprox(p, f"p^-{k}", z1, record=record)


def even_weight_vanishing(phi: PhiApprox, max_weight: int) -> dict:
    """For each even weight: whether the coefficient is 0 to its certified precision."""
    return {m: (phi.z1[m].is_zero if isinstance(phi.z1[m], PAdicApprox) else phi.z1[m] == 0)
            for m in range(2, max_weight + 1, 2) if m in phi.z1}


# ---------------------------------------------------------------------------
# depth two


def _normalized_point(N: int):
    cache = {}

    def h(parts):
        if parts not in cache:
            cache[parts] = harmonic_sum(parts, N) * mpq(N) ** sum(parts)
        return cache[parts]
    return h


@dataclass
class BracketSolution:
    parts: tuple
    values: dict           # L -> PAdicApprox
    params: dict

    def certified(self, L: int):
        return _absprec(self.values[L])


def _solve_depth2_once(p, k, parts, phi, L_max, M, rows):
    s2, s1 = parts
    wt = s1 + s2
    n_unknown = L_max + 1
    if rows is None:
        rows = list(range(1, (M or n_unknown) + 1))
    q = p ** k
    trunc = sym_tail(L_max + 2 + wt, 3, p)
    A, b, tails = [], [], []
    for N in rows:
        lhs = mpq(q * N) ** wt * harmonic_sum(parts, q * N)
        # N^weight H_N loses up to weight * log_p(N) digits when p does not divide N
        extra = wt * _ilog(N, p)
        known = har_act_lower(ScaledSym(phi, N), _normalized_point(N), parts, precision=trunc + extra)
        rep = known.to_rational() if isinstance(known, PAdicApprox) else known
        A.append([mpq(N) ** (L + wt) for L in range(n_unknown)])
        b.append(lhs - rep)
        tails.append(min(trunc, _absprec(known)))
    res = certified_solve(A, b, tails, p)
    res.params = {"L_max": L_max, "M": len(rows), "tail": trunc, "row_prec": min(tails)}
    return res


def solve_depth2(p: int, k: int, parts: Sequence[int], precision: int, depth1: PhiApprox, *,
                 L_max: int = None, M: int = None, rows: Sequence[int] = None,
                 needed_L: int = 0, scale: int = 1) -> BracketSolution:
    """Brackets (Phi^{-1} e1 Phi)[e0^L e1 e0^{s2-1} e1 e0^{s1-1} e1] for L = 0..L_max.

    For each N the value (p^k N)^weight H_{p^k N}(s2, s1) minus every term of
    the action that involves only depth-one data leaves
    sum_L N^{L + weight} times the unknown brackets.  Brackets with
    L <= needed_L must reach ``precision``.  ``scale`` multiplies the final
    L_max and M.
    """
    parts = tuple(parts)
    if len(parts) != 2:
        raise ValueError("depth-two solver needs a composition of depth two")
    auto = L_max is None
    if auto:
        L_max = needed_L + 10
    last = None
    while True:
        res = _solve_depth2_once(p, k, parts, depth1, L_max, M, rows)
        if not res.residual_ok:
            raise ArithmeticError("inconsistent depth-two system: the valuation bound failed")
        vals = {L: _padic(x, p, c, sym_tail(L + sum(parts) + 1, 3, p))
                for L, (x, c) in enumerate(zip(res.values, res.certified))}
        short = [L for L in range(needed_L + 1) if _absprec(vals[L]) < precision]
        if not short:
            break
        worst = min(_absprec(vals[L]) for L in short)
        if res.params["row_prec"] < res.params["tail"] and last is not None and worst <= last:
            raise PrecisionShortfall(
                f"depth two {parts}: depth-one input limits the rows to p^{res.params['row_prec']}, "
                f"brackets reach only p^{worst}")
        last = worst
        if not auto or L_max >= _MAX_TRUNCATION:
            raise PrecisionShortfall(
                f"depth two {parts}: L={short} below p^{precision} with L_max={L_max}, M={res.params['M']}")
        L_max += 6
    if scale > 1:
        L_max, M = L_max * scale, res.params["M"] * scale
        res = _solve_depth2_once(p, k, parts, depth1, L_max, M, None)
        if not res.residual_ok:
            raise ArithmeticError("inconsistent depth-two system: the valuation bound failed")
        vals = {L: _padic(x, p, c, sym_tail(L + sum(parts) + 1, 3, p))
                for L, (x, c) in enumerate(zip(res.values, res.certified))}
    return BracketSolution(parts, vals, res.params)


def _bracket_row(L: int, s2: int, s1: int) -> dict:
    """Linear part, in the depth-two coefficients, of the bracket (L, s2, s1)."""
    row = {}
    if L == 0:
        row[(s2 - 1, s1 - 1)] = row.get((s2 - 1, s1 - 1), 0) + 1
    sign = (-1) ** (s1 + s2)
    for i in range(L + 1):
        key = (s1 - 1 + i, s2 - 1 + L - i)
        row[key] = row.get(key, 0) + sign * comb(s1 - 1 + i, i) * comb(s2 - 1 + L - i, L - i)
    return row


def recover_depth2(phi1: PhiApprox, solutions: Iterable[BracketSolution], max_weight: int) -> dict:
    """Depth-two coefficients, weight by weight, from solved brackets and shuffle relations."""
    p = phi1.p
    by_weight = {}
    for sol in solutions:
        s2, s1 = sol.parts
        for L, val in sol.values.items():
            by_weight.setdefault(L + s1 + s2, []).append((L, s2, s1, val))
    z2 = {}
    for m in range(2, max_weight + 1):
        unknowns = [(a, m - 2 - a) for a in range(m - 1)]
        A, b, tails = [], [], []
        for L, s2, s1, val in by_weight.get(m, []):
            row = _bracket_row(L, s2, s1)
            # the product of two depth-one coefficients inside the bracket
            prod = phi1._z1(s2 + L) * phi1._z1(s1)
            known = prod * ((-1) ** s2 * comb(s2 + L - 1, L)) if not _is_zero(prod) else mpq(0)
            rhs = val - known
            A.append([row.get(u, 0) for u in unknowns])
            b.append(rhs.to_rational() if isinstance(rhs, PAdicApprox) else rhs)
            tails.append(_absprec(rhs))
        for a in range(m - 1):
            bb = m - 2 - a
            if a > bb:
                continue
            row = {}
            for w, c in shuffle_product(_word1(a + 1), _word1(bb + 1)).items():
                i = w.index("1")
                key = (i, len(w) - i - 2)
                row[key] = row.get(key, 0) + c
            rhs = phi1._z1(a + 1) * phi1._z1(bb + 1)
            A.append([row.get(u, 0) for u in unknowns])
            b.append(rhs.to_rational() if isinstance(rhs, PAdicApprox) else rhs)
            tails.append(_absprec(rhs))
        try:
            res = certified_solve(A, b, tails, p)
        except (ArithmeticError, ValueError) as exc:
            raise PrecisionShortfall(f"depth-two coefficients of weight {m} are not determined: {exc}")
        if not res.residual_ok:
            raise ArithmeticError(f"inconsistent depth-two relations in weight {m}")
        for u, x, c in zip(unknowns, res.values, res.certified):
            z2[u] = _padic(x, p, c, coefficient_bound(m, 2, p))
    return z2


def build_phi(p: int, k: int = 1, max_weight: int = 8, max_depth: int = 1, precision: int = 5, *,
              bracket_weight: int = None, depth1_precision: int = None, scale: int = 1) -> PhiApprox:
    """Solve Phi_{p^-k} in depth one and, optionally, depth two.

    Depth one is solved well beyond ``max_weight`` since the depth-two
    relations and all infinite sums consume high-weight coefficients.  In
    depth two only the weights whose a priori valuation bound is below
    ``precision`` are solved; the rest are O(p^bound).  Brackets are solved
    for every composition of weight up to ``bracket_weight`` and combined
    with the shuffle relations.  ``scale`` multiplies every truncation once
    the target is met, which gives an independent re-solve for audits.
    """
    if max_depth not in (1, 2):
        raise ValueError("only depth one and two are supported")
    if max_depth == 1:
        phi = solve_depth1(p, k, max_weight, precision, scale=scale)
        phi.record.update({"target": precision, "scale": scale})
        return phi
    d1_prec = depth1_precision or precision + 12
    depth1 = solve_depth1(p, k, max_weight + 30, d1_prec, scale=scale)
    solved = max((m for m in range(2, max_weight + 1) if coefficient_bound(m, 2, p) < precision), default=1)
    if bracket_weight is None:
        bracket_weight = max((solved + 1) // 2 + 1, 3)
    sols = []
    for parts in compositions_up_to(bracket_weight, 2, min_depth=2):
        if sum(parts) <= solved:
            sols.append(solve_depth2(p, k, parts, precision, depth1, needed_L=solved - sum(parts), scale=scale))
    z2 = recover_depth2(depth1, sols, solved)
    for m in range(solved + 1, max_weight + 1):
        for a in range(m - 1):
            z2[(a, m - 2 - a)] = PAdicApprox.zero(p, coefficient_bound(m, 2, p))
    brackets = {(L, *sol.parts): v for sol in sols for L, v in sol.values.items()}
    record = dict(depth1.record)
    record.update({"depth2": "brackets and shuffle relations", "bracket_weight": bracket_weight,
                   "solved_weight": solved, "target": precision, "scale": scale})
    return PhiApprox(p, f"p^-{k}", depth1.z1, z2, brackets, record)


# ---------------------------------------------------------------------------
# verification of the harmonic-sum identities


def _report(kind: str, params: dict, lhs, rhs, requested) -> dict:
    lhs_p = lhs if isinstance(lhs, PAdicApprox) else None
    cert = _absprec(lhs)
    diff = (lhs - rhs) if isinstance(lhs, PAdicApprox) else None
    agree = diff.is_zero if isinstance(diff, PAdicApprox) else (lhs == rhs)
    return {
        "check": kind,
        "params": params,
        "lhs": lhs_p.to_json() if lhs_p is not None else scalar_to_json(lhs),
        "rhs": scalar_to_json(rhs),
        "certified_prec": None if cert == _INF else int(cert),
        "requested_prec": requested,
        "agree": bool(agree),
        "degraded": cert < requested,
    }


def verify_theorem1(p: int, k: int, a: int, parts: Sequence[int], N: int, phi: PhiApprox,
                    precision: int) -> dict:
    """Compare tau(N) Phi acting on N^weight H_N with (p^k N)^weight H_{p^k N}.

    With a nonzero shift a the window (a p^k, (a+1) p^k) is reached through
    the expansion sum_l prod a^{l_i} binom(-s_i, l_i) of the unshifted values;
    only N = 1 is supported there.
    """
    parts = tuple(parts)
    wt = sum(parts)
    params = {"p": p, "k": k, "a": a, "N": N, "parts": format_composition(parts)}
    if a == 0:
        rhs = mpq(p ** k * N) ** wt * harmonic_sum(parts, p ** k * N)
        src = ScaledSym(phi, N) if N != 1 else phi
        lhs = har_act(src, _normalized_point(N), [parts], precision=precision + wt * _ilog(N, p))[parts]
        return _report("theorem1", params, lhs, rhs, precision)
    if N != 1:
        raise ValueError("a nonzero shift is only supported at N = 1")
    rhs = finite_mzv(parts, p, k, a)
    total = mpq(0)
    budget = max(precision - wt, 0)
    for ls in _bounded_tuples(len(parts), budget):
        coef = mpq(1)
        for s, l in zip(parts, ls):
            coef *= mpq(a) ** l * _binom_neg(s, l)
        if coef == 0:
            continue
        shifted = tuple(s + l for s, l in zip(parts, ls))
        val = prefix_sum(phi, word_from_composition(shifted), precision=precision)
        total = val * coef + total
    # omitted terms are finite multiple zeta values of weight above precision
    lhs = _cap(total, wt + budget + 1, p)
    return _report("theorem1", params, lhs, rhs, precision)


def _binom_neg(s: int, l: int):
    return (-1) ** l * comb(s + l - 1, l)


def _bounded_tuples(d: int, total: int):
    if d == 0:
        yield ()
        return
    for first in range(total + 1):
        for rest in _bounded_tuples(d - 1, total - first):
            yield (first,) + rest


def _cap(x, absprec, p):
    if isinstance(x, PAdicApprox):
        return x.reduce(absprec)
    return PAdicApprox.from_rational(x, p, absprec)


# ---------------------------------------------------------------------------
# Frobenius-invariant paths


def _limit_error(K: int, m: int, d: int, p: int):
    """Valuation bound for the difference between the fixed point and Phi_{p^K}."""
    if d == 1:
        return K * m + coefficient_tail(m, 1, p)
    best = K * m + coefficient_tail(m, 2, p)
    for mf in range(2, m - 1):
        best = min(best, coefficient_tail(m - mf, 1, p) + K * mf + coefficient_tail(mf, 1, p))
    return best


def phi_infinity_approx(phi_m1: PhiApprox, k_big: int) -> tuple:
    """(Phi_{p^inf}, Phi_{p^-inf}) approximated through Phi_{p^{k_big}}.

    Phi_{p^inf} = Phi_{p^K} o tau(p^K) Phi_{p^inf}, so replacing it by
    Phi_{p^K} costs at least K times the weight plus the coefficient bound.
    Each coefficient is capped at that certificate.
    """
    p = phi_m1.p
    pk = ihara_inverse(frobenius_iterate(phi_m1, k_big))
    z1 = {m: _cap(v, _limit_error(k_big, m, 1, p), p) for m, v in pk.z1.items()}
    z2 = {(a, b): _cap(v, _limit_error(k_big, a + b + 2, 2, p), p) for (a, b), v in pk.z2.items()}
    inf = PhiApprox(p, "p^inf", z1, z2, record={"k_big": k_big})
    minf = ihara_inverse(inf, "p^-inf")
    minf.record = {"k_big": k_big}
    return inf, minf


def fixed_point_residual(phi_m1: PhiApprox, k: int, phi_inf: PhiApprox) -> dict:
    """Phi_{p^-k} o Phi_{p^inf} - tau(p^k) Phi_{p^inf}, coefficientwise.

    Returns word -> (is zero at its precision, precision).
    """
    p = phi_m1.p
    lhs = ihara_product(frobenius_iterate(phi_m1, k), phi_inf)
    rhs = tau(phi_inf, p ** k)
    out = {}
    for m in lhs.z1:
        if m in rhs.z1:
            r = lhs.z1[m] - rhs.z1[m]
            out[_word1(m)] = (_zero_at_prec(r), _absprec(r))
    for key in lhs.z2:
        if key in rhs.z2:
            r = lhs.z2[key] - rhs.z2[key]
            out[_word2(*key)] = (_zero_at_prec(r), _absprec(r))
    return out


def _zero_at_prec(x) -> bool:
    return x.is_zero if isinstance(x, PAdicApprox) else x == 0


def taylor_coefficients(phi_inf: PhiApprox, phi_minf: PhiApprox, parts: Sequence[int], u_max: int,
                        precision: int) -> dict:
    """Coefficients of (p^k)^u in zeta_{f^{k,0}}(parts), u = 0..u_max.

    zeta_{f^{k,0}} is the family sum_L sym Phi_{p^-k}[e0^L e1 W] and
    Phi_{p^-k} = tau(p^k) Phi_{p^inf} o Phi_{p^-inf}; the coefficient of
    (p^k)^u is the weight-u graded piece of the action of Phi_{p^inf} on the
    family attached to Phi_{p^-inf}.
    """
    parts = tuple(parts)
    cache = {}

    def h(c):
        if c not in cache:
            cache[c] = prefix_sum(phi_minf, word_from_composition(c), precision=precision)
        return cache[c]

    return {u: har_act_graded(phi_inf, h, u, [parts])[parts] for u in range(u_max + 1)}, h


def _graded_tail(phi_inf: PhiApprox, h, parts, U: int, k: int):
    """Lower bound on v((p^k)^u C_u) for all u > U."""
    from .ncseries import block_decompositions, composition_of_word

    p = phi_inf.p
    W = word_from_composition(parts)
    best = _INF
    for i in range(len(W) + 1):
        X, rest = W[:i], W[i:]
        for quotient, blocks in block_decompositions(rest):
            if any("1" not in bl for bl in blocks):
                continue
            base = i + sum(len(bl) - 1 for bl in blocks)
            bound = 0
            for bl in blocks:
                c = phi_inf.coeff(bl)
                bound += _valuation_floor(c, p)
            qc = composition_of_word(quotient)
            hv = h(qc) if qc else mpq(1)
            bound += _valuation_floor(hv, p)
            if bound == _INF:
                continue
            u = max(U + 1, base)
            j = u - base
            best = min(best, k * u + sym_tail(j + 1 + i, 1 + X.count("1"), p) + bound)
    return best


def _valuation_floor(x, p):
    if isinstance(x, PAdicApprox):
        return x.valuation_lower_bound()
    return _INF if x == 0 else valuation(x, p)


def depth1_taylor_geometric(phi_inf: PhiApprox, s: int, u: int, precision: int):
    """Depth-one Taylor coefficient from the values zeta_{p^inf}(m) = -Phi_{p^inf}[e0^{m-1} e1].

    u = 0: (-1)^s sum_{L >= 1} binom(L+s-1, L) zeta(s+L); 1 <= u <= s: 0;
    u > s: -(-1)^s binom(u-1, u-s) zeta(u).
    """
    p = phi_inf.p
    zeta = lambda m: -phi_inf._z1(m)
    sign = (-1) ** s
    if 1 <= u <= s:
        return mpq(0)
    if u > s:
        return zeta(u) * (-sign * comb(u - 1, u - s))
    total = mpq(0)
    L = 1
    while True:
        if s + L > phi_inf.weight_cap(1):
            break
        total = zeta(s + L) * (sign * comb(L + s - 1, L)) + total
        if coefficient_tail(s + L + 1, 1, p) >= precision:
            break
        L += 1
    return _cap(total, coefficient_tail(s + L + 1, 1, p), p)


def depth1_taylor_elementary(p: int, s: int, u: int, precision: int):
    """The same coefficient from H_p values and Bernoulli coefficients only.

    With A(l, j) = p^{s+l} H_p(s+l) B^l_j binom(-s, l):
    u = 0: sum_l sum_j A(l, j) / (1 - p^{j+s}); u > s: -1/(1 - p^u) sum_l A(l, u-s);
    zero otherwise.  Terms with index l have valuation at least
    s + l - 1 - floor(log_p(l+1)).
    """
    if 1 <= u <= s:
        return mpq(0)

    def A(l, j):
        return (mpq(p) ** (s + l) * harmonic_sum((s + l,), p) * bern_coeff(j, l) * _binom_neg(s, l))

    def term_bound(l):
        return s + l - 1 - _ilog(l + 1, p)

    total = mpq(0)
    l = 0 if u == 0 else u - s - 1
    while True:
        if u == 0:
            for j in range(1, l + 2):
                total += A(l, j) / (1 - mpq(p) ** (j + s))
        else:
            total += A(l, u - s)
        if term_bound(l + 1) >= precision:
            break
        l += 1
    if u > s:
        total = -total / (1 - mpq(p) ** u)
    return PAdicApprox.from_rational(total, p, term_bound(l + 1))


def _ilog(n: int, p: int) -> int:
    e, q = 0, p
    while q <= n:
        q *= p
        e += 1
    return e


def verify_theorem2(p: int, parts: Sequence[int], a: int, k_list: Sequence[int], precision: int,
                    phi_m1: PhiApprox, k_big: int = 4) -> list:
    """Partial Taylor sums in p^k against the exact zeta_{f^{k,a}}(parts), one report per k."""
    parts = tuple(parts)
    phi_inf, phi_minf = phi_infinity_approx(phi_m1, k_big)
    wt = sum(parts)
    reports = []
    for k in k_list:
        budget = max(precision - wt, 0) if a else 0
        total = mpq(0)
        taylor_tail = _INF
        for ls in _bounded_tuples(len(parts), budget):
            coef = mpq(1)
            for s, l in zip(parts, ls):
                coef *= mpq(a) ** l * _binom_neg(s, l)
            if coef == 0:
                continue
            shifted = tuple(s + l for s, l in zip(parts, ls))
            value, tail = _taylor_sum(phi_inf, phi_minf, shifted, k, precision)
            taylor_tail = min(taylor_tail, tail)
            total = value * coef + total
        if a:
            total = _cap(total, wt + budget + 1, p)
        rhs = finite_mzv(parts, p, k, a)
        rep = _report("theorem2", {"p": p, "k": k, "a": a, "parts": format_composition(parts),
                                   "k_big": k_big}, total, rhs, precision)
        rep["taylor_tail"] = None if taylor_tail == _INF else int(taylor_tail)
        rep["approximation_prec"] = int(min(_absprec(v) for v in phi_inf.z1.values()))
        reports.append(rep)
    return reports


def _taylor_sum(phi_inf, phi_minf, parts, k, precision):
    p = phi_inf.p
    U = max(sum(parts), 1)
    while True:
        coeffs, h = taylor_coefficients(phi_inf, phi_minf, parts, U, precision)
        tail = _graded_tail(phi_inf, h, parts, U, k)
        if tail >= precision or U + 2 >= phi_inf.weight_cap(1):
            break
        U += 2
    total = mpq(0)
    for u, c in coeffs.items():
        if not _is_zero(c):
            total = c * mpq(p) ** (k * u) + total
    return _cap(total, tail, p), tail


# ---------------------------------------------------------------------------
# other identities


def verify_yasuda_hirose(p: int, parts: Sequence[int], precision: int, phi: PhiApprox) -> dict:
    """H_p(s_d..s_1) from the values p^{-weight} zeta_{p^-1}.

    (-1)^d sum_k (-1)^{s_{k+1}+..+s_d}
        [sum_l prod_{i>k} p^{l_i} binom(l_i+s_i-1, l_i) Z(s_{k+1}+l_{k+1}, .., s_d+l_d)] Z(s_k, .., s_1)
    where Z(c) = p^{-weight(c)} zeta_{p^-1}(c).  The l-sum is cut at total
    degree; every omitted term has valuation at least -weight plus the
    coefficient bound at the omitted weight.
    """
    parts = tuple(parts)
    d = len(parts)
    s_of = lambda i: parts[d - i]  # s_i, i = 1..d

    def Z(c):
        if not c:
            return mpq(1)
        return phi.zeta(c) / mpq(p) ** sum(c)

    total = mpq(0)
    for k in range(d + 1):
        outer = [s_of(i) for i in range(k + 1, d + 1)]   # s_{k+1}, ..., s_d
        inner = tuple(parts[d - k:])                     # s_k, ..., s_1
        sign = (-1) ** sum(outer)
        right = Z(inner)
        if not outer:
            left = mpq(1)
        else:
            left = _yh_outer(p, outer, precision - _valuation_floor(right, p), phi, Z)
        total = left * right * sign + total
    if d % 2:
        total = -total
    rhs = harmonic_sum(parts, p)
    return _report("yasuda-hirose", {"p": p, "parts": format_composition(parts)}, total, rhs, precision)


def _yh_outer(p, outer, target, phi, Z):
    wt = sum(outer)
    dd = len(outer)
    cap = phi.weight_cap(dd)
    total = mpq(0)
    budget = 0
    while True:
        if wt + budget > cap:
            budget -= 1
            break
        if -wt + coefficient_tail(wt + budget + 1, dd, p) >= target:
            break
        budget += 1
    for ls in _bounded_tuples(dd, budget):
        coef = mpq(1)
        for s, l in zip(outer, ls):
            coef *= mpq(p) ** l * comb(l + s - 1, l)
        total = Z(tuple(s + l for s, l in zip(outer, ls))) * coef + total
    tail = -wt + coefficient_tail(wt + budget + 1, dd, p)
    return _cap(total, tail, p)


def zeta_f_negative(parts: Sequence[int], p: int, k: int, a: int, phi_pk: PhiApprox, precision: int):
    """The family attached to sym Phi_{p^k}, shifted by a through the binomial expansion."""
    parts = tuple(parts)
    if not parts:
        return mpq(1)
    wt = sum(parts)
    d = len(parts)
    if a == 0:
        return prefix_sum(phi_pk, word_from_composition(parts), precision=precision)
    total = mpq(0)
    budget = 0
    while sym_tail(wt + budget + 2, d + 1, p) < precision and wt + budget + 1 < phi_pk.max_weight:
        budget += 1
    for ls in _bounded_tuples(d, budget):
        coef = mpq(1)
        for s, l in zip(parts, ls):
            coef *= mpq(a) ** l * _binom_neg(s, l)
        shifted = tuple(s + l for s, l in zip(parts, ls))
        total = prefix_sum(phi_pk, word_from_composition(shifted), precision=precision) * coef + total
    return _cap(total, sym_tail(wt + budget + 2, d + 1, p), p)


def check_grouplike(phi: PhiApprox, max_weight: int) -> dict:
    """Shuffle relations Phi[u] Phi[v] = sum Phi[u sh v] for depth(u) + depth(v) <= 2.

    Returns counts of relations checked and failed at the tracked precision.
    """
    from .ncseries import words_of_weight

    words = {}
    for n in range(1, max_weight + 1):
        for w in words_of_weight(n):
            if 1 <= w.count("1") <= 1 or (w.count("1") == 0):
                words.setdefault(n, []).append(w)
    checked = failed = 0
    worst = None
    for n1 in range(1, max_weight):
        for n2 in range(1, max_weight - n1 + 1):
            for u in words[n1]:
                for v in words[n2]:
                    if u.count("1") + v.count("1") > 2 or u > v and n1 == n2:
                        continue
                    try:
                        lhs = phi.phi(u) * phi.phi(v)
                        rhs = mpq(0)
                        for w, c in shuffle_product(u, v).items():
                            x = phi.phi(w)
                            if not _is_zero(x):
                                rhs = x * c + rhs
                    except KeyError:
                        continue
                    diff = lhs - rhs
                    checked += 1
                    if not _zero_at_prec(diff):
                        failed += 1
                        worst = worst or (u, v)
    return {"checked": checked, "failed": failed, "witness": worst}
