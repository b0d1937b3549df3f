import math
import random

import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from conftest import random_grouplike
from padic_mhs.haraction import (
    ScaledSym, SeriesSym, har_act, har_act_depth1, har_act_depth2, har_act_graded, har_act_lower,
    prefix_sum, sigma_of,
)
from padic_mhs.harmonic import HarPoint, compositions_up_to
from padic_mhs.ncseries import NCSeries, ihara_action, tau_scale, word_from_composition
from padic_mhs.numkit import scalars_agree

W = 7
P = 11
COMPS = list(compositions_up_to(6, 3))


def setup(seed):
    rng = random.Random(seed)
    g1, g2 = random_grouplike(W, rng), random_grouplike(W, rng)
    h = HarPoint({c: rng.randint(-5, 5) for c in COMPS})
    return g1, g2, h


def scaled(g):
    # sym coefficients of a rational grouplike series are p-integral here,
    # so tau(p) g has a tail bound growing with the weight
    return ScaledSym(SeriesSym(g, P, lambda n, d: 0), P)


@settings(max_examples=5)
@given(st.integers(0, 10 ** 6))
def test_closed_forms_match_general_action(seed):
    g1, _, h = setup(seed)
    src = scaled(g1)
    for c in COMPS:
        full = har_act(src, h, [c])[c]
        if len(c) == 1:
            assert scalars_agree(full, har_act_depth1(src, h, c[0]))
        elif len(c) == 2:
            assert scalars_agree(full, har_act_depth2(src, h, *c))
        lower = har_act_lower(src, h, c)
        assert scalars_agree(full - lower, prefix_sum(src, word_from_composition(c)))


@settings(max_examples=3)
@given(st.integers(0, 10 ** 6))
def test_action_is_a_group_action(seed):
    g1, g2, h = setup(seed)
    g12 = ihara_action(tau_scale(g1, P), tau_scale(g2, P))
    s12 = SeriesSym(g12, P, lambda n, d: n - 1)
    lhs = har_act(s12, h, COMPS)
    rhs = har_act(scaled(g1), har_act(scaled(g2), h, COMPS), COMPS)
    for c in COMPS:
        assert scalars_agree(lhs[c], rhs[c]), c


@settings(max_examples=3)
@given(st.integers(0, 10 ** 6))
def test_graded_pieces_sum_to_the_action(seed):
    g1, _, h = setup(seed)
    base = SeriesSym(g1, P, lambda n, d: 0)
    assert har_act_graded(base, h, 0, COMPS).entries == h.entries
    total = {c: mpq(0) for c in COMPS}
    for s in range(W + 1):
        piece = har_act_graded(base, h, s, COMPS)
        for c in COMPS:
            total[c] += piece[c] * mpq(P) ** s
    full = har_act(scaled(g1), h, COMPS)
    for c in COMPS:
        assert scalars_agree(full[c], total[c])


@settings(max_examples=3)
@given(st.integers(0, 10 ** 6))
def test_sigma_commutes_with_the_action(seed):
    g1, g2, _ = setup(seed)
    g12 = ihara_action(tau_scale(g1, P), tau_scale(g2, P))
    sf = sigma_of(SeriesSym(tau_scale(g2, P), P, lambda n, d: n - 1), 3, 6)
    a = har_act(scaled(g1), sf, COMPS)
    b = sigma_of(SeriesSym(g12, P, lambda n, d: n - 1), 3, 6)
    for c in COMPS:
        assert scalars_agree(a[c], b[c]), c


def test_identity_series_acts_trivially():
    one = NCSeries.one(6)
    sig = sigma_of(one, 2, 5, p=5, tail_bound=lambda n, d: math.inf)
    assert set(sig.entries.values()) == {0}
    h = HarPoint({c: mpq(c[0], 7) for c in compositions_up_to(5, 2)})
    out = har_act(one, h, p=5, tail_bound=lambda n, d: math.inf)
    assert out.entries == h.entries


def test_missing_tail_bound_is_refused():
    g = random_grouplike(5, random.Random(1))
    with pytest.raises(ValueError):
        har_act(g, HarPoint({(1,): 1}), p=5)
    with pytest.raises(ValueError):
        ScaledSym(SeriesSym(g, 5), mpq(1, 5))


def test_prefix_sum_certificate():
    g = random_grouplike(7, random.Random(3))
    src = scaled(g)
    full = prefix_sum(src, "1")
    short = prefix_sum(src, "1", L_max=2)
    assert short.absprec == 4 and full.absprec > short.absprec
    assert scalars_agree(full, short)
