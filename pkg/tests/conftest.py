import random

import pytest
from gmpy2 import mpq
from hypothesis import settings

from padic_mhs.ncseries import NCSeries, series_exp
from padic_mhs.pmzv import build_phi, solve_depth1

settings.register_profile("padic", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("padic")

# depth-two solves are the slow part of the suite, so each prime is solved once
DEPTH2_WEIGHT = {5: 17, 7: 16}
_cache = {}


def cached(key, make):
    if key not in _cache:
        _cache[key] = make()
    return _cache[key]


def depth1_phi(p, max_weight=16, precision=8):
    return cached(("d1", p, max_weight, precision), lambda: solve_depth1(p, 1, max_weight, precision))


def depth2_phi(p, scale=1):
    return cached(("d2", p, scale), lambda: build_phi(p, 1, DEPTH2_WEIGHT[p], 2, 8, scale=scale))


def random_lie(cap, rng, rounds=3, size=3):
    """A random Lie series with no weight-one part, built from iterated brackets."""
    e0 = NCSeries.letter("0", cap)
    e1 = NCSeries.letter("1", cap)

    def br(a, b):
        return a * b - b * a

    elems = [br(e0, e1)]
    for _ in range(rounds):
        elems += [br(x, y) for x in (e0, e1) for y in elems[-2:]]
    out = NCSeries.zero(cap)
    for x in elems:
        c = mpq(rng.randint(-size, size), rng.randint(1, 2))
        if c:
            out = out + x.scale(c)
    return out


def random_grouplike(cap, rng):
    return series_exp(random_lie(cap, rng))


@pytest.fixture
def rng():
    return random.Random(20240101)


@pytest.fixture(scope="session")
def phi5():
    return depth2_phi(5)


@pytest.fixture(scope="session")
def phi7():
    return depth2_phi(7)
