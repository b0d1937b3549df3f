import math
from fractions import Fraction

import pytest
from gmpy2 import mpq
from hypothesis import given, strategies as st

from padic_mhs.numkit import (
    PAdicApprox, as_rational, bernoulli, binom_general, padic_reduce, rational_from_str, rational_to_str,
    scalar_from_json, scalar_to_json, scalars_agree, valuation,
)

primes = st.sampled_from([2, 3, 5, 7, 11])
nonzero_rationals = st.builds(
    lambda n, d: mpq(n, d), st.integers(-10 ** 6, 10 ** 6).filter(bool), st.integers(1, 10 ** 6))
rationals = st.builds(lambda n, d: mpq(n, d), st.integers(-10 ** 6, 10 ** 6), st.integers(1, 10 ** 6))


def test_bernoulli_values():
    assert bernoulli(0) == 1
    assert bernoulli(1) == mpq(-1, 2)
    assert bernoulli(2) == mpq(1, 6)
    assert bernoulli(3) == 0
    assert bernoulli(12) == mpq(-691, 2730)
    assert bernoulli(20) == mpq(-174611, 330)


def test_bernoulli_faulhaber():
    # sum_{n<N} n^l from the Bernoulli numbers, against direct summation
    for l in range(7):
        for N in range(1, 12):
            formula = sum(mpq(math.comb(l + 1, j)) * bernoulli(j) * mpq(N) ** (l + 1 - j)
                          for j in range(l + 1)) / (l + 1)
            assert formula == sum(mpq(n) ** l for n in range(N))


def test_binom_general():
    assert binom_general(-1, 5) == -1
    assert binom_general(-2, 3) == -4
    assert binom_general(5, 2) == 10
    assert binom_general(3, 5) == 0
    with pytest.raises(ValueError):
        binom_general(3, -1)


def test_valuation_and_reduction():
    assert valuation(mpq(25, 12), 5) == 2
    assert valuation(mpq(3, 50), 5) == -2
    assert valuation(0, 5) is None
    x = padic_reduce(mpq(25, 12), 5, 3)
    assert (x.v, x.unit, x.prec) == (2, 73, 3)
    assert (12 * 73 - 1) % 125 == 0


def test_rational_text_round_trip():
    assert rational_from_str(" -7/21 ") == mpq(-1, 3)
    assert rational_to_str(mpq(4, 2)) == "2"
    assert as_rational(Fraction(3, 9)) == mpq(1, 3)
    with pytest.raises(ValueError):
        rational_from_str("1/0")
    with pytest.raises(TypeError):
        as_rational(0.5)


def test_zero_kinds():
    exact = PAdicApprox.zero(5)
    approx = PAdicApprox.zero(5, 4)
    assert exact.is_exact_zero and exact.absprec == math.inf
    assert approx.is_zero and not approx.is_exact_zero and approx.absprec == 4
    assert PAdicApprox.from_rational(mpq(625, 3), 5, 4).is_zero


def test_cancellation_loses_precision():
    a = PAdicApprox.from_rational(mpq(1, 3), 5, 6)
    b = PAdicApprox.from_rational(mpq(1, 3) + 5 ** 4, 5, 6)
    d = a - b
    assert d.v == 4 and d.absprec == 6 and d.prec == 2


@given(rationals, rationals, primes, st.integers(1, 8))
def test_padic_ring_operations_match_rationals(x, y, p, r):
    a, b = PAdicApprox.from_rational(x, p, r), PAdicApprox.from_rational(y, p, r)
    assert scalars_agree(a + b, x + y)
    assert scalars_agree(a - b, x - y)
    assert scalars_agree(a * b, x * y)
    # multiplying by an exact zero gives an exact zero
    assert scalars_agree(a * y, x * y)


@given(nonzero_rationals, nonzero_rationals, primes, st.integers(1, 8))
def test_padic_division_matches_rationals(x, y, p, r):
    a = PAdicApprox.from_rational(x, p, valuation(x, p) + r)
    b = PAdicApprox.from_rational(y, p, valuation(y, p) + r)
    q = a / b
    assert q.agrees_with(x / y)
    assert q.prec == r
    assert (1 / b).agrees_with(1 / y)


@given(rationals, primes, st.integers(1, 10), st.integers(1, 10))
def test_reduce_is_monotone(x, p, r, s):
    a = PAdicApprox.from_rational(x, p, max(r, s))
    b = a.reduce(min(r, s))
    assert b.absprec == min(r, s) or (b.absprec == math.inf)
    assert b.agrees_with(a) and b.agrees_with(x)


@given(rationals, primes, st.integers(1, 10))
def test_json_round_trip(x, p, r):
    a = PAdicApprox.from_rational(x, p, r)
    assert PAdicApprox.from_json(a.to_json()) == a
    assert scalar_from_json(scalar_to_json(a)) == a
    assert scalar_from_json(scalar_to_json(x)) == x


@given(rationals, primes, st.integers(1, 6))
def test_scalars_agree_is_symmetric(x, p, r):
    a = PAdicApprox.from_rational(x, p, r)
    assert scalars_agree(a, x) and scalars_agree(x, a)
    assert not scalars_agree(a, x + mpq(p) ** (r - 1))
