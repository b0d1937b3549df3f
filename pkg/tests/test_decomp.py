import pytest
from gmpy2 import mpq
from hypothesis import given, strategies as st

from padic_mhs import decomp
from padic_mhs.harmonic import finite_mzv, harmonic_sum, psi
from padic_mhs.numkit import valuation

exponents = st.integers(-4, 4).filter(bool)
chars = st.lists(exponents, min_size=1, max_size=3).map(lambda es: tuple(psi(e) for e in es))


@given(chars, st.integers(0, 15), st.integers(1, 15))
def test_reflection(cs, M, length):
    assert decomp.reflect_bounds(cs, M, M + length).ok


@given(chars, st.integers(-20, 20), st.integers(1, 15))
def test_translation(cs, M, N):
    if M < 0 and M + N > 0:
        M = -N
    assert decomp.translate_bounds(cs, M, N).ok


@given(chars, st.integers(1, 15), st.integers(1, 15))
def test_addition(cs, N1, N2):
    lhs, rhs, ok = decomp.add_bounds(cs, N1, N2)
    assert ok and lhs == rhs


@given(chars, st.integers(2, 20), st.data())
def test_addition_at_several_cutpoints(cs, N, data):
    qs = data.draw(st.lists(st.integers(1, N - 1), unique=True, max_size=4).map(sorted))
    assert decomp.add_bounds_multi(cs, N, qs).ok


@given(chars, st.integers(1, 8), st.integers(1, 8))
def test_multiplication(cs, N, M):
    assert decomp.multiply_bounds(cs, N, M).ok


def test_integer_parts_mean_negative_powers():
    inst = decomp.add_bounds([2, 1], 3, 4)
    assert inst.lhs == harmonic_sum((2, 1), 7)


def test_rejects_bad_ranges():
    with pytest.raises(ValueError):
        decomp.reflect_bounds([1], 5, 5)
    with pytest.raises(ValueError):
        decomp.translate_bounds([1], -2, 5)
    with pytest.raises(ValueError):
        decomp.add_bounds_multi([1], 7, [3, 3])


def test_digit_cutpoints():
    assert decomp.digit_cutpoints(7, 2) == [4, 6]
    assert decomp.digit_cutpoints(25, 5) == []
    assert decomp.digit_cutpoints(23, 3) == [9, 18, 21, 22]


def test_translation_taylor_mode():
    r = decomp.translate_bounds([1], 5, 5, "taylor", 20, 5)
    assert r.certified >= 20 and r.agrees_with(r.params["exact"])
    with pytest.raises(ValueError):
        decomp.translate_bounds([1], 5, 6, "taylor", 20, 5)


@pytest.mark.parametrize("a", [1, 2, 3])
def test_shifted_window(a):
    r = decomp.shift_finite_mzv((2,), 5, 1, a, 6)
    assert r.certified >= 9 and r.agrees_with(finite_mzv((2,), 5, 1, a))


@pytest.mark.parametrize("parts,N,p", [((2,), 7, 3), ((2, 1), 19, 3), ((1, 1), 10, 2)])
def test_digit_decomposition(parts, N, p):
    r = decomp.digit_decompose(parts, N, p, 25)
    assert r.certified >= 4 and r.agrees_with(harmonic_sum(parts, N))


@given(st.integers(1, 40), st.sampled_from([2, 3, 5]), st.integers(1, 3))
def test_depth_one_digit_expansion(N, p, s):
    r = decomp.digit_expansion_depth1(s, N, p, 30)
    assert r.agrees_with(harmonic_sum((s,), N))


@pytest.mark.parametrize("parts", [(1,), (3,), (2, 1), (1, 1), (3, 2), (1, 4)])
@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_padic_multiplication(parts, N):
    r = decomp.multiply_bounds_padic(parts, N, 5, 1, 6)
    exact = mpq(5 * N) ** sum(parts) * harmonic_sum(parts, 5 * N)
    assert r.agrees_with(exact) and r.certified >= 4


def test_padic_multiplication_point():
    pt = decomp.multiply_point_padic([(1,), (2, 1)], 3, 5, 1, 8)
    assert pt[(2, 1)].agrees_with(mpq(15) ** 3 * harmonic_sum((2, 1), 15))
    with pytest.raises(ValueError):
        decomp.multiply_bounds_padic((1, 1, 1), 2, 5, 1, 4)


def test_reindexing():
    idx = decomp.reindex_padic((1,), 3, 2)
    assert idx[2] == ((1, 0, 1),)  # n = 3
    assert idx[6] == ((0, 2, 1),)  # n = 7 = 3*2 + 1
    assert len(decomp.reindex_padic((1, 1), 3, 2)) == 28
    r = decomp.finite_mzv_digit_form((2, 1), 5, 2, 4)
    assert r.certified == 8 and r.agrees_with(finite_mzv((2, 1), 5, 2))


@pytest.mark.parametrize("parts", [(1,), (2,), (2, 1)])
@pytest.mark.parametrize("r", [1, 2, 3])
def test_fermat_form(parts, r):
    x = decomp.fermat_digit_form(parts, 7, 1, r) - finite_mzv(parts, 7, 1)
    assert x == 0 or valuation(x, 7) >= r


def test_harness_record():
    rec = decomp.harness_record("addition", {"N1": 2, "N2": 3}, lambda: decomp.add_bounds([1], 2, 3))
    assert rec["equal"] and rec["lhs"] == rec["rhs"] and isinstance(rec["runtime_us"], int)
    rec = decomp.harness_record("digits", {}, lambda: decomp.digit_expansion_depth1(1, 7, 2, 20))
    assert rec["equal"] and rec["certified_prec"] >= 4
