import math
import random

import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from conftest import depth1_phi, random_grouplike
from padic_mhs.harmonic import compositions_up_to, finite_mzv, harmonic_sum
from padic_mhs.haraction import har_act
from padic_mhs.ncseries import NCSeries, ihara_action, sym, tau_scale, words_of_weight
from padic_mhs.numkit import PAdicApprox, scalars_agree
from padic_mhs.pmzv import (
    PhiApprox, PrecisionShortfall, build_phi, certified_solve, check_grouplike, coefficient_bound, coefficient_tail,
    depth1_taylor_elementary, depth1_taylor_geometric, even_weight_vanishing, fixed_point_residual,
    frobenius_iterate, ihara_inverse, ihara_product, phi_infinity_approx, solve_depth1, sym_tail, tau,
    taylor_coefficients, verify_theorem1, verify_theorem2, verify_yasuda_hirose, zeta_f_negative,
)

W = 8


def dense_phi(seed, p=5):
    """A rational grouplike series and the sparse view of its depth <= 2 part."""
    g = random_grouplike(W, random.Random(seed))
    z1 = {m: g["0" * (m - 1) + "1"] for m in range(2, W + 1)}
    z2 = {(a, m - 2 - a): g["0" * a + "1" + "0" * (m - 2 - a) + "1"] for m in range(2, W + 1) for a in range(m - 1)}
    return g, PhiApprox(p, "test", z1, z2)


def _is_zero(x):
    return x.is_zero if isinstance(x, PAdicApprox) else x == 0


# sparse storage against the dense series arithmetic


@settings(max_examples=5)
@given(st.integers(0, 10 ** 6))
def test_sparse_coefficients_match_dense_series(seed):
    g, phi = dense_phi(seed)
    s = sym(g)
    for n in range(1, W + 1):
        for w in words_of_weight(n):
            if w.count("1") <= 2:
                assert phi.phi(w) == g[w], w
    for n in range(1, W + 1):
        for w in words_of_weight(n):
            if w.count("1") <= 2:
                assert phi.coeff(w) == s[w], w


@settings(max_examples=5)
@given(st.integers(0, 10 ** 6), st.integers(0, 10 ** 6))
def test_sparse_ihara_product_matches_dense(s1, s2):
    g, pg = dense_phi(s1)
    f, pf = dense_phi(s2)
    prod = ihara_action(g, f)
    sp = ihara_product(pg, pf)
    for m in range(2, W + 1):
        assert sp.z1[m] == prod["0" * (m - 1) + "1"]
        for a in range(m - 1):
            assert sp.z2[(a, m - 2 - a)] == prod["0" * a + "1" + "0" * (m - 2 - a) + "1"]
    inv = ihara_inverse(pg)
    back = ihara_product(pg, inv)
    assert all(_is_zero(v) for v in back.z1.values())
    assert all(_is_zero(v) for v in back.z2.values())
    lam = mpq(2, 3)
    scaled = tau(pg, lam)
    dense = tau_scale(g, lam)
    assert scaled.z2[(1, 2)] == dense["01001"]


# bounds


def test_a_priori_bounds():
    for p in (5, 7):
        for d in (1, 2, 3):
            vals = [coefficient_bound(n, d, p) for n in range(d + 1, 60)]
            assert vals[-1] > vals[0]
            # from weight 3d on the bound never decreases
            tail = vals[2 * d - 1:]
            assert all(a <= b for a, b in zip(tail, tail[1:]))
            # one split of a sym coefficient of depth d + 1 is a coefficient of depth d
            assert sym_tail(30, d + 1, p) <= coefficient_tail(29, d, p)
        # sym g = g^-1 e1 g has no depth-one terms besides e1
        assert sym_tail(30, 1, p) == math.inf
        assert coefficient_bound(3, 3, p) == math.inf


# depth-one solver


@pytest.mark.parametrize("p", [5, 7])
def test_depth_one_even_weights_vanish(p):
    phi = depth1_phi(p)
    vanish = even_weight_vanishing(phi, 12)
    assert all(vanish.values())
    assert not phi.z1[3].is_zero


@pytest.mark.parametrize("p", [5, 7])
def test_depth_one_relations_for_different_s_agree(p):
    base = depth1_phi(p)
    for s in (2, 3):
        other = solve_depth1(p, 1, 10, 6, s=s)
        for m in range(s + 1, 11):
            assert base.z1[m].agrees_with(other.z1[m]), (s, m)


def test_depth_one_precision_grows_with_truncation():
    small = solve_depth1(5, 1, 8, 3)
    large = solve_depth1(5, 1, 8, 3, scale=2)
    for m in range(2, 9):
        assert large.z1[m].absprec >= small.z1[m].absprec
        assert large.z1[m].agrees_with(small.z1[m])


def test_depth_one_explicit_truncation_shortfall():
    with pytest.raises(PrecisionShortfall):
        solve_depth1(5, 1, 8, 12, L_max=6, M=6)


def test_depth_one_second_frobenius():
    phi2 = solve_depth1(5, 2, 6, 4)
    phi1 = depth1_phi(5)
    it = frobenius_iterate(phi1, 2)
    for m in range(2, 7):
        assert phi2.z1[m].agrees_with(it.z1[m]), m


def test_certified_solve_small_system():
    # x + y = 3 + O(5^4), x - y = 1 + O(5^4)
    res = certified_solve([[1, 1], [1, -1]], [mpq(3), mpq(1)], [4, 4], 5)
    assert res.residual_ok
    assert res.values == [2, 1]
    assert min(res.certified) == 4


# depth two


def test_depth_two_is_grouplike(phi7):
    rep = check_grouplike(phi7, 8)
    assert rep["checked"] > 100 and rep["failed"] == 0


@pytest.mark.parametrize("phi_name", ["phi5", "phi7"])
def test_depth_two_stuffle(phi_name, request):
    # the harmonic product holds for xi(s) = (-1)^depth zeta(s), the plain coefficient
    phi = request.getfixturevalue(phi_name)
    xi = lambda c: phi.zeta(c) * (-1) ** len(c)
    for a in range(1, 9):
        for b in range(1, 9):
            if (a, b) == (1, 1):
                continue
            lhs = xi((a, b)) + xi((b, a)) + xi((a + b,))
            assert scalars_agree(lhs, xi((a,)) * xi((b,))), (a, b)
    # Euler's relation
    assert scalars_agree(xi((2, 1)), xi((3,)))
    assert not phi.zeta((3,)).is_zero


def test_depth_two_json_round_trip(phi7):
    back = PhiApprox.from_json(phi7.to_json())
    for key, v in phi7.z2.items():
        assert back.z2[key] == v
    assert back.record == phi7.record


@pytest.mark.parametrize("N", [57, 60, 75])
@pytest.mark.parametrize("parts", [(2, 1), (1, 3), (3,)])
def test_theorem1_away_from_the_solved_rows(phi5, N, parts):
    # N is not one of the relation rows, so this is an independent check
    rep = verify_theorem1(5, 1, 0, parts, N, phi5, 4)
    assert rep["agree"] and not rep["degraded"], rep


@pytest.mark.parametrize("parts", [(2,), (1, 2), (2, 2)])
def test_shifted_window_at_N_1(phi5, parts):
    rep = verify_theorem1(5, 1, 1, parts, 1, phi5, 4)
    assert rep["agree"] and rep["certified_prec"] >= 4
    assert scalars_agree(mpq(rep["rhs"]), finite_mzv(parts, 5, 1, 1))


def test_shift_needs_N_1(phi5):
    with pytest.raises(ValueError):
        verify_theorem1(5, 1, 1, (2,), 2, phi5, 4)


@pytest.mark.parametrize("parts", [(1,), (2,), (2, 1), (1, 3)])
def test_yasuda_hirose(phi5, parts):
    rep = verify_yasuda_hirose(5, parts, 3, phi5)
    assert rep["agree"] and not rep["degraded"]
    assert mpq(rep["rhs"]) == harmonic_sum(parts, 5)


def test_finite_values_annihilated(phi5):
    # the inverse series maps the finite values to the trivial point
    inv = ihara_inverse(phi5, "p^1")
    out = har_act(inv, lambda c: finite_mzv(c, 5, 1), list(compositions_up_to(5, 2)), precision=6)
    for c, v in out.entries.items():
        assert _is_zero(v), c
    assert zeta_f_negative((), 5, 1, 0, inv, 4) == 1


# invariant path and Taylor expansion


@pytest.fixture(scope="module")
def invariant():
    phi = solve_depth1(5, 1, 40, 16)
    inf, minf = phi_infinity_approx(phi, 4)
    return phi, inf, minf


def test_fixed_point_residual(invariant):
    phi, inf, _ = invariant
    res = fixed_point_residual(phi, 1, inf)
    assert all(zero for zero, _ in res.values())
    assert min(prec for _, prec in res.values()) >= 8


@pytest.mark.parametrize("s", [1, 2, 3])
def test_taylor_coefficients(invariant, s):
    _, inf, minf = invariant
    coeffs, _ = taylor_coefficients(inf, minf, (s,), 8, 6)
    for u in range(1, s + 1):
        assert _is_zero(coeffs[u]), u
    for u in range(9):
        assert scalars_agree(depth1_taylor_geometric(inf, s, u, 6), depth1_taylor_elementary(5, s, u, 6))


@pytest.mark.parametrize("s", [1, 2, 3])
def test_taylor_sums_at_higher_precision(invariant, s):
    phi, _, _ = invariant
    for rep in verify_theorem2(5, (s,), 0, [1, 2], 7, phi):
        assert rep["agree"] and not rep["degraded"], rep


def test_taylor_sum_with_shift(invariant):
    phi, _, _ = invariant
    for rep in verify_theorem2(5, (2,), 1, [1], 4, phi):
        assert rep["agree"], rep


def test_build_records_solver_parameters():
    phi = build_phi(7, 1, 8, 1, 4)
    assert phi.record["target"] == 4 and phi.record["relations"] == "depth-one harmonic"
    with pytest.raises(ValueError):
        build_phi(7, 1, 8, 3, 4)
