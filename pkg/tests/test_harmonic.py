import itertools
from fractions import Fraction
from math import comb

import pytest
from gmpy2 import mpq
from hypothesis import given, strategies as st

from padic_mhs.harmonic import (
    CharSpec, HarPoint, bern_coeff_nested, char_weight, compositions_up_to, eval_poly, finite_mzv,
    format_composition, geometric_power_sum, harmonic_point, harmonic_sum, harmonic_sum_char,
    harmonic_sum_congruent, harmonic_weight, parse_composition, psi, tilde_harmonic, tilde_poly,
)
from padic_mhs.numkit import PAdicApprox, valuation

parts_st = st.lists(st.integers(1, 4), min_size=1, max_size=3).map(tuple)


def brute(parts, N, lower=0):
    """Direct nested sum with Fractions, innermost index smallest."""
    d = len(parts)
    total = Fraction(0)
    for idx in itertools.combinations(range(lower + 1, N), d):
        term = Fraction(1)
        for n, s in zip(idx, reversed(parts)):
            term /= Fraction(n) ** s
        total += term
    return mpq(total.numerator, total.denominator)


def test_known_values():
    assert harmonic_sum((1,), 5) == mpq(25, 12)
    assert harmonic_sum((2, 1), 4) == mpq(5, 12)
    assert harmonic_sum((), 3) == 1
    assert harmonic_sum((1, 1), 2) == 0


@given(parts_st, st.integers(1, 14), st.integers(0, 5))
def test_matches_direct_summation(parts, N, lower):
    assert harmonic_sum(parts, N, lower) == brute(parts, N, lower)


@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 20))
def test_stuffle(a, b, N):
    lhs = harmonic_sum((a,), N) * harmonic_sum((b,), N)
    rhs = harmonic_sum((a, b), N) + harmonic_sum((b, a), N) + harmonic_sum((a + b,), N)
    assert lhs == rhs


@given(parts_st, st.integers(1, 12))
def test_characters_reproduce_powers(parts, N):
    assert harmonic_sum_char([psi(-s) for s in parts], N) == harmonic_sum(parts, N)


def test_tabulated_character():
    chi = CharSpec("tabulated", table=(mpq(0), mpq(1), mpq(-1)), modulus=3)
    val = harmonic_sum_char([chi], 7)
    assert val == sum(chi(n) for n in range(1, 7))
    assert (chi * chi)(2) == 1
    with pytest.raises(ValueError):
        psi(-2)(0)


def test_excluded_multiples():
    val = harmonic_sum_char([psi(-1)], 10, exclude_multiples_of=3)
    assert val == sum(mpq(1, n) for n in range(1, 10) if n % 3)


@given(st.lists(st.integers(1, 3), min_size=1, max_size=3).map(tuple),
       st.lists(st.booleans(), min_size=3, max_size=3), st.integers(1, 30))
def test_congruence_restricted_sum(parts, flags, N):
    pattern = flags[: len(parts)]
    p, k0 = 3, 1
    expect = mpq(0)
    for idx in itertools.combinations(range(1, N), len(parts)):
        chain = (0,) + idx
        ok = all(not pattern[len(parts) - 1 - i] or chain[i + 1] % 3 == chain[i] % 3 for i in range(len(parts)))
        if ok:
            term = mpq(1)
            for n, s in zip(idx, reversed(parts)):
                term /= mpq(n) ** s
            expect += term
    assert harmonic_sum_congruent(parts, N, p, k0, pattern) == expect
    if not any(pattern):
        assert expect == harmonic_sum(parts, N)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=3), st.integers(0, 12))
def test_tilde_power_sums(ls, N):
    neg = tuple(-l for l in ls)
    expect = mpq(0)
    for idx in itertools.combinations(range(0, N), len(ls)):
        term = mpq(1)
        for n, l in zip(idx, reversed(ls)):
            term *= mpq(n) ** l
        expect += term
    assert tilde_harmonic(neg, N) == expect
    poly = tilde_poly(neg)
    for k in range(len(poly)):
        assert bern_coeff_nested(k, ls) == poly[k]
    assert eval_poly(poly, N) == expect


def test_finite_values_and_wolstenholme():
    for p in (5, 7, 11, 13):
        assert valuation(finite_mzv((1,), p, 1), p) >= 3
        assert valuation(harmonic_sum((2,), p), p) >= 1
    assert finite_mzv((2,), 5, 1, 1) == 25 * harmonic_sum((2,), 10, lower=5)
    x = finite_mzv((1,), 5, 1, as_="padic", prec=6)
    assert isinstance(x, PAdicApprox) and x.agrees_with(mpq(125, 12))


def test_compositions():
    assert parse_composition("3, 1") == (3, 1)
    assert format_composition((3, 1)) == "3,1"
    with pytest.raises(ValueError):
        parse_composition("3,x")
    comps = list(compositions_up_to(6, 3))
    for w in range(1, 7):
        for d in range(1, 4):
            want = comb(w - 1, d - 1) if d <= w else 0
            assert sum(1 for c in comps if len(c) == d and sum(c) == w) == want


def test_weights():
    assert char_weight(psi(-3), 5) == 3
    assert harmonic_weight([psi(-3), psi(2)], 5) == 1
    chi = CharSpec("tabulated", table=tuple(mpq(1, 25) if r == 0 else mpq(1) for r in range(5)), modulus=5)
    assert char_weight(chi, 5) == 2


def test_har_point():
    pt = harmonic_point(4, [(1,), (2, 1)])
    assert pt[(2, 1)] == mpq(5, 12) * 64
    assert pt[()] == 1
    back = HarPoint.from_json(pt.to_json())
    assert back.entries == pt.entries
    raw = harmonic_point(4, [(2, 1)], normalized=False)
    assert raw[(2, 1)] == mpq(5, 12)


@given(st.integers(0, 4), st.integers(1, 9), st.fractions(min_value=-3, max_value=3).filter(lambda x: x != 1))
def test_geometric_power_sum(alpha, k, x):
    x = mpq(x.numerator, x.denominator)
    form = geometric_power_sum(alpha)
    expect = sum(x ** w * mpq(w) ** alpha for w in range(k))
    assert form.evaluate([x], k) == expect


def test_geometric_power_sum_depth_two():
    form = geometric_power_sum([[0, 1], [1, 0, 1]])
    xs = [mpq(2, 3), mpq(-1, 2)]
    for k in range(1, 8):
        expect = sum(xs[0] ** w1 * w1 * xs[1] ** w2 * (1 + w2 ** 2)
                     for w1 in range(k) for w2 in range(w1 + 1, k))
        assert form.evaluate(xs, k) == expect
