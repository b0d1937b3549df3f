"""Exact rationals, Bernoulli numbers, generalized binomials and p-adic approximations.

Rationals are gmpy2 ``mpq`` values.  A :class:`PAdicApprox` stores an element
of Q_p known modulo a power of p, as a valuation, a unit residue and a
relative precision.  Arithmetic between approximations (and exact rationals)
propagates precision pessimistically, so a result never claims digits it
does not have.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction
from numbers import Integral, Rational as _AbstractRational

import gmpy2
from gmpy2 import mpq, mpz

Rational = type(mpq(0))

__all__ = [
    "Rational",
    "PAdicApprox",
    "as_rational",
    "rational_to_str",
    "rational_from_str",
    "bernoulli",
    "set_bernoulli_cap",
    "binom_general",
    "valuation",
    "padic_reduce",
    "scalar_to_json",
    "scalar_from_json",
    "scalars_agree",
]


def as_rational(x) -> Rational:
    """Coerce ints, Fractions, strings like ``"3/4"`` and mpq values to mpq."""
    if isinstance(x, Rational):
        return x
    if isinstance(x, str):
        return rational_from_str(x)
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, (Integral, type(mpz(0)))):
        return mpq(int(x))
    if isinstance(x, _AbstractRational):
        return mpq(int(x.numerator), int(x.denominator))
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def rational_to_str(x) -> str:
    x = as_rational(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def rational_from_str(s: str) -> Rational:
    s = s.strip()
    if "/" in s:
        num, den = s.split("/", 1)
        if int(den) == 0:
            raise ValueError(f"zero denominator in {s!r}")
        return mpq(int(num), int(den))
    return mpq(int(s))


# ---------------------------------------------------------------------------
# Bernoulli numbers

_bern_lock = threading.Lock()
_bern_cache: list = [mpq(1)]
_bern_cap = 256


def set_bernoulli_cap(cap: int) -> None:
    """Change how many Bernoulli numbers are kept in the shared table."""
    global _bern_cap
    if cap < 1:
        raise ValueError("cap must be positive")
    with _bern_lock:
        _bern_cap = cap
        del _bern_cache[cap + 1:]


def _bernoulli_table(n: int) -> list:
    # B_m from sum_{j<=m} C(m+1, j) B_j = 0, which gives B_1 = -1/2
    table = list(_bern_cache)
    for m in range(len(table), n + 1):
        acc = mpq(0)
        c = mpz(1)  # C(m+1, j)
        for j in range(m):
            acc += c * table[j]
            c = c * (m + 1 - j) // (j + 1)
        table.append(-acc / (m + 1))
    return table


def bernoulli(n: int) -> Rational:
    """Bernoulli number B_n with B_1 = -1/2."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > 1 and n % 2 == 1:
        return mpq(0)
    if n < len(_bern_cache):
        return _bern_cache[n]
    table = _bernoulli_table(n)
    with _bern_lock:
        if len(table) > len(_bern_cache):
            _bern_cache[:] = table[: _bern_cap + 1]
    return table[n]


def binom_general(top: int, k: int) -> Rational:
    """top (top-1) ... (top-k+1) / k!, for any integer top."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    num = mpz(1)
    for i in range(k):
        num *= top - i
    return mpq(num, gmpy2.fac(k))


def valuation(x, p: int):
    """p-adic valuation of a nonzero rational; None for zero."""
    x = as_rational(x)
    if x == 0:
        return None
    a = gmpy2.remove(x.numerator, p)[1]
    b = gmpy2.remove(x.denominator, p)[1]
    return int(a - b)


# ---------------------------------------------------------------------------
# p-adic approximations


class PAdicApprox:
    """An element of Q_p known to a finite absolute precision.

    A nonzero value is ``p**v * (unit + O(p**prec))`` with ``unit`` coprime to p.
    A value indistinguishable from zero is ``O(p**absprec)``; it is flagged by
    ``is_zero`` and has ``v`` equal to None.  An exact zero has no absolute
    precision at all (``absprec`` is infinite) and behaves like the rational 0.
    Other exact quantities are kept as rationals and mix freely with
    approximations.
    """

    __slots__ = ("p", "v", "unit", "prec", "_zero_abs")

    def __init__(self, p: int, v, unit: int, prec: int, *, zero_absprec=None):
        self.p = int(p)
        if v is None:
            self.v = None
            self.unit = 0
            self.prec = 0
            self._zero_abs = None if zero_absprec is None else int(zero_absprec)
            return
        if prec < 1:
            raise ValueError("relative precision must be positive")
        unit = int(unit) % (self.p ** prec)
        if unit % self.p == 0:
            raise ValueError("unit must be coprime to p")
        self.v = int(v)
        self.unit = unit
        self.prec = int(prec)
        self._zero_abs = None

    # construction helpers
    @classmethod
    def zero(cls, p: int, absprec=None) -> "PAdicApprox":
        """O(p**absprec), or the exact zero when ``absprec`` is None."""
        return cls(p, None, 0, 0, zero_absprec=absprec)

    @classmethod
    def from_rational(cls, x, p: int, absprec: int):
        """Reduce an exact rational to absolute precision ``absprec``."""
        x = as_rational(x)
        if x == 0:
            return cls.zero(p, absprec)
        v = valuation(x, p)
        if v >= absprec:
            return cls.zero(p, absprec)
        return padic_reduce(x, p, absprec - v)

    @classmethod
    def _from_scaled(cls, p: int, num: int, m: int, absprec: int):
        # the value p**m * num known modulo p**absprec
        r = absprec - m
        if r <= 0:
            return cls.zero(p, absprec)
        num = int(num) % (p ** r)
        if num == 0:
            return cls.zero(p, absprec)
        num_z, e = gmpy2.remove(mpz(num), p)
        e = int(e)
        return cls(p, m + e, int(num_z), r - e)

    # properties
    @property
    def is_zero(self) -> bool:
        return self.v is None

    @property
    def is_exact_zero(self) -> bool:
        return self.v is None and self._zero_abs is None

    @property
    def absprec(self):
        if self.v is None:
            return math.inf if self._zero_abs is None else self._zero_abs
        return self.v + self.prec

    def valuation_lower_bound(self) -> int:
        """Certified lower bound on the valuation of the represented element."""
        return self.absprec if self.v is None else self.v

    def to_rational(self) -> Rational:
        """The canonical rational representative p**v * unit (0 for a zero)."""
        if self.v is None:
            return mpq(0)
        return mpq(self.unit) * mpq(self.p) ** self.v

    def reduce(self, absprec: int) -> "PAdicApprox":
        """Forget digits beyond ``absprec``."""
        if absprec >= self.absprec:
            return self
        if self.v is None:
            return PAdicApprox.zero(self.p, absprec)
        return PAdicApprox._from_scaled(self.p, self.unit, self.v, absprec)

    # arithmetic
    def _coerce(self, other):
        if isinstance(other, PAdicApprox):
            if other.p != self.p:
                raise ValueError("cannot combine approximations for different primes")
            return mpq(0) if other.is_exact_zero else other
        return as_rational(other)

    def __add__(self, other):
        other = self._coerce(other)
        p = self.p
        if self.is_exact_zero:
            return other
        if not isinstance(other, PAdicApprox):
            if other == 0:
                return self
            other = PAdicApprox.from_rational(other, p, self.absprec)
        a = min(self.absprec, other.absprec)
        if self.v is None:
            return other.reduce(a)
        if other.v is None:
            return self.reduce(a)
        m = min(self.v, other.v)
        num = self.unit * p ** (self.v - m) + other.unit * p ** (other.v - m)
        return PAdicApprox._from_scaled(p, num, m, a)

    __radd__ = __add__

    def __neg__(self):
        if self.v is None:
            return self
        return PAdicApprox(self.p, self.v, -self.unit, self.prec)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        p = self.p
        if self.is_exact_zero:
            return mpq(0)
        if not isinstance(other, PAdicApprox):
            if other == 0:
                return mpq(0)
            w = valuation(other, p)
            if self.v is None:
                return PAdicApprox.zero(p, self._zero_abs + w)
            q = other / mpq(p) ** w
            u = int(q.numerator) * pow(int(q.denominator), -1, p ** self.prec)
            return PAdicApprox(p, self.v + w, self.unit * u, self.prec)
        if self.v is None and other.v is None:
            return PAdicApprox.zero(p, self._zero_abs + other._zero_abs)
        if self.v is None:
            return PAdicApprox.zero(p, self._zero_abs + other.v)
        if other.v is None:
            return PAdicApprox.zero(p, other._zero_abs + self.v)
        r = min(self.prec, other.prec)
        return PAdicApprox(p, self.v + other.v, self.unit * other.unit, r)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if isinstance(other, PAdicApprox) and other.v is None:
            raise ZeroDivisionError("division by an approximation of zero")
        if self.is_exact_zero:
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return mpq(0)
        if not isinstance(other, PAdicApprox):
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return self * (1 / other)
        r = min(self.prec, other.prec) if self.v is not None else None
        inv = PAdicApprox(self.p, -other.v, pow(other.unit, -1, self.p ** other.prec), other.prec)
        if r is None:
            return self * inv
        return PAdicApprox(self.p, self.v - other.v, self.unit * inv.unit, r)

    def __rtruediv__(self, other):
        other = as_rational(other)
        if self.v is None:
            raise ZeroDivisionError("division by an approximation of zero")
        inv = PAdicApprox(self.p, -self.v, pow(self.unit, -1, self.p ** self.prec), self.prec)
        return inv * other

    def __pow__(self, n: int):
        if n < 0:
            return 1 / (self ** (-n))
        result = mpq(1)
        for _ in range(n):
            result = self * result
        return result

    def agrees_with(self, other) -> bool:
        """True when both sides are equal on their common certified digits."""
        diff = self - self._coerce(other)
        return isinstance(diff, PAdicApprox) and diff.is_zero or diff == 0

    def __eq__(self, other):
        if not isinstance(other, PAdicApprox):
            return NotImplemented
        return (self.p, self.v, self.unit, self.prec, self._zero_abs) == (
            other.p, other.v, other.unit, other.prec, other._zero_abs)

    def __hash__(self):
        return hash((self.p, self.v, self.unit, self.prec, self._zero_abs))

    def __repr__(self):
        if self.is_exact_zero:
            return f"PAdicApprox(0, p={self.p})"
        if self.v is None:
            return f"PAdicApprox(O({self.p}^{self._zero_abs}))"
        return f"PAdicApprox({self.p}^{self.v}*{self.unit} + O({self.p}^{self.absprec}))"

    def to_json(self) -> dict:
        if self.is_exact_zero:
            return {"p": self.p, "zero": True}
        if self.v is None:
            return {"p": self.p, "zero": True, "absprec": self._zero_abs}
        return {"p": self.p, "v": self.v, "unit": self.unit, "prec": self.prec}

    @classmethod
    def from_json(cls, data: dict) -> "PAdicApprox":
        if data.get("zero"):
            return cls.zero(data["p"], data.get("absprec"))
        return cls(data["p"], data["v"], data["unit"], data["prec"])


def padic_reduce(x, p: int, r: int):
    """Valuation and unit of a rational modulo p**r.

    Exact zero is returned as the exact-zero approximation.
    """
    if r < 1:
        raise ValueError("precision must be at least 1")
    x = as_rational(x)
    if x == 0:
        return PAdicApprox.zero(p)
    num, a = gmpy2.remove(x.numerator, p)
    den, b = gmpy2.remove(x.denominator, p)
    mod = p ** r
    unit = int(num) * pow(int(den), -1, mod) % mod
    return PAdicApprox(p, int(a - b), unit, r)


def scalars_agree(a, b) -> bool:
    """Exact equality for rationals, equality on common digits otherwise."""
    if isinstance(a, PAdicApprox):
        return a.agrees_with(b)
    if isinstance(b, PAdicApprox):
        return b.agrees_with(a)
    return as_rational(a) == as_rational(b)


def scalar_to_json(x):
    if isinstance(x, PAdicApprox):
        return x.to_json()
    return rational_to_str(x)


def scalar_from_json(data):
    if isinstance(data, dict):
        return PAdicApprox.from_json(data)
    return rational_from_str(str(data))
