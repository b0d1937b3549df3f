"""Multiple harmonic sums and the p-adic multiple zeta values they determine.

Modules:

* ``numkit``: rationals, Bernoulli numbers, p-adic approximations.
* ``ncseries``: truncated series in two noncommuting letters, shuffles, Ihara action.
* ``harmonic``: exact multiple harmonic sums and finite multiple zeta values.
* ``decomp``: exact and p-adic decompositions of harmonic sums.
* ``haraction``: action of grouplike series on families of harmonic sums.
* ``pmzv``: solving and checking the p-adic values.
* ``cli``: command-line front end.
"""

from .numkit import PAdicApprox, Rational, bernoulli, padic_reduce, valuation
from .ncseries import NCSeries, ihara_action, is_grouplike, sym
from .harmonic import HarPoint, finite_mzv, harmonic_point, harmonic_sum, parse_composition
from .haraction import har_act
from .pmzv import (
    PhiApprox,
    PrecisionShortfall,
    build_phi,
    solve_depth1,
    solve_depth2,
    verify_theorem1,
    verify_theorem2,
    verify_yasuda_hirose,
)

__version__ = "0.1.0"
