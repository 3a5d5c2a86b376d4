"""Minimal special-function layer: real Gamma, real dilogarithm, Euler's constant.

Every closed-form coefficient in the asymptotics module is assembled from
these three primitives, so their accuracy targets (<= 1e-12) are set well
below the tolerances of the checks that consume them.
"""

import math

from .exceptions import ValidationError

# Euler-Mascheroni constant, gamma = lim (H_n - log n), to double precision.
EULER_GAMMA = 0.5772156649015329

_PI2_6 = math.pi ** 2 / 6.0


def euler_gamma():
    """Euler's constant gamma = 0.5772156649015329."""
    return EULER_GAMMA


def gamma_fn(x):
    """Gamma function on the real line.

    Delegates to the C library implementation (accurate to ~1 ulp, far
    inside the 1e-12 relative target on |x| <= 50).  Non-positive integers
    are poles and rejected up front.
    """
    if x <= 0.0 and x == math.floor(x):
        raise ValidationError(f"gamma_fn: pole at non-positive integer x={x!r}")
    return math.gamma(x)


def _dilog_series(x):
    # Power series sum x^k / k^2, geometric convergence for |x| <= 1/2.
    term = x
    total = x
    k = 1
    while abs(term) > 1e-18 * max(1.0, abs(total)):
        k += 1
        term *= x
        total += term / (k * k)
        if k > 200:
            break
    return total


def dilog(x):
    """Real dilogarithm Li2(x) = -int_0^x log(1-u)/u du, for x <= 1.

    Series on |x| <= 1/2; the remaining real axis is folded onto the series
    region with the standard reflection, Landen and inversion identities.
    Absolute error <= 1e-12 on the whole domain.
    """
    if x > 1.0:
        raise ValidationError(f"dilog: defined on x <= 1, got x={x!r}")
    if x == 1.0:
        return _PI2_6
    if x == 0.0:
        return 0.0
    if abs(x) <= 0.5:
        return _dilog_series(x)
    if x > 0.5:
        # Reflection: Li2(x) + Li2(1-x) = pi^2/6 - log(x) log(1-x)
        return _PI2_6 - math.log(x) * math.log1p(-x) - _dilog_series(1.0 - x)
    if x >= -1.0:
        # Landen: Li2(x) = -Li2(x/(x-1)) - log^2(1-x)/2; x/(x-1) in [1/3, 1/2]
        y = x / (x - 1.0)
        return -_dilog_series(y) - 0.5 * math.log1p(-x) ** 2
    # Inversion for x < -1: Li2(x) + Li2(1/x) = -pi^2/6 - log^2(-x)/2
    return -_PI2_6 - 0.5 * math.log(-x) ** 2 - dilog(1.0 / x)
