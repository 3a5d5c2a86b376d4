"""Closed-form exponents, amplitudes and expansions for the product kernel (xy)^s.

Everything here is an explicit formula: the similarity exponents selected by
moment conservation, the near-origin and far-tail behaviour of the similarity
profile, small-exponent expansions of the free constants, and the
Laplace-space compatibility residual whose vanishing pins the first-order
exponent shift to beta = -1 - 2s.

All constants come from :mod:`coagsim.specfun`; nothing is hard-coded locally.
"""

import math
from dataclasses import dataclass

from .exceptions import ParameterRangeError, ValidationError
from .specfun import EULER_GAMMA, dilog, gamma_fn

_PI2 = math.pi ** 2

# Coefficients of the O(eps) terms of the gauge moment G and the origin
# amplitude a for the first-moment-2 profile, s = eps small.
G_EPS_COEFF = 2.0 * EULER_GAMMA + 4.0 * _PI2 / 3.0 - 8.0
A_EPS_COEFF = (4.0 * EULER_GAMMA ** 2 - 16.0 * EULER_GAMMA
               + (8.0 / 3.0) * EULER_GAMMA * _PI2 + 2.0 * _PI2 - 12.0)
# Coefficient of log(xi) in the lognormal intermediate region.
LOGNORMAL_LIN_COEFF = 2.0 * EULER_GAMMA + 4.0 * _PI2 / 3.0 - 4.0


@dataclass(frozen=True)
class KernelSpec:
    """Kernel exponent s of K(x,y) = (xy)^s, restricted to s < 1/2."""

    s: float

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ValidationError(f"kernel exponent must be finite, got {self.s!r}")
        if self.s >= 0.5:
            raise ValidationError(
                f"kernel exponent s={self.s!r} not supported: requires s < 1/2 "
                "(s >= 1/2 is the gelling regime)")

    @property
    def regime(self):
        if self.s < 0.0:
            return "negative"
        if self.s == 0.0:
            return "zero"
        return "positive"


@dataclass(frozen=True)
class SimilarityExponents:
    """Scaling exponents of c(x,t) ~ t^alpha f(t^beta x).

    ``exact`` is False when beta is only a first-order expansion (the case
    0 < s < 1/2, where no closed form exists).  alpha always satisfies
    alpha = (2s+1) beta - 1.
    """

    beta: float
    alpha: float
    exact: bool


def exponents_for(kernel):
    """Similarity exponents selected by boundedness of all moments.

    s < 0 gives the exact eigenvalue beta = -1/(1-2s); s = 0 gives beta = -1;
    for 0 < s < 1/2 only the first-order value beta = -1 - 2s is available
    and is flagged as approximate.
    """
    if not isinstance(kernel, KernelSpec):
        kernel = KernelSpec(float(kernel))
    s = kernel.s
    if s < 0.0:
        beta, exact = -1.0 / (1.0 - 2.0 * s), True
    elif s == 0.0:
        beta, exact = -1.0, True
    else:
        beta, exact = -1.0 - 2.0 * s, False
    alpha = (2.0 * s + 1.0) * beta - 1.0
    return SimilarityExponents(beta=beta, alpha=alpha, exact=exact)


def origin_amplitude(s):
    """Amplitude A of the near-origin power law f ~ A xi^(-1-2s), 0 < s < 1/2.

    A = -2 Gamma(-2s) / Gamma(-s)^2, positive on the whole range and equal
    to s + o(s^3) as s -> 0+.
    """
    if not 0.0 < s < 0.5:
        raise ValidationError(f"origin_amplitude needs 0 < s < 1/2, got s={s!r}")
    return -2.0 * gamma_fn(-2.0 * s) / gamma_fn(-s) ** 2


def tail_constant(s, beta, amplitude, alternate=False):
    """Prefactor B of the Gamma-distribution tail B xi^(-2s) e^(-xi).

    Default evaluates B = -2 beta A Gamma(2+2s)/Gamma(1+s)^2.  The
    ``alternate`` flag switches the Gamma arguments to (2-2s, 1-s), the
    variant obtained by carrying the Beta integral with the tail exponent
    -2s; both reduce to B = 2 at s = 0 and the difference is O(s).
    """
    if alternate:
        return -2.0 * beta * amplitude * gamma_fn(2.0 - 2.0 * s) / gamma_fn(1.0 - s) ** 2
    return -2.0 * beta * amplitude * gamma_fn(2.0 + 2.0 * s) / gamma_fn(1.0 + s) ** 2


def tail_profile(xi, s, beta, amplitude, alternate=False):
    """Far-tail form B xi^(-2s) e^(-xi) of the similarity profile."""
    if xi <= 0.0:
        raise ValidationError(f"tail_profile needs xi > 0, got xi={xi!r}")
    return tail_constant(s, beta, amplitude, alternate) * xi ** (-2.0 * s) * math.exp(-xi)


def origin_profile_negative(xi, s, beta, G, amplitude):
    """Superfast-decay form of the profile near the origin for s < 0.

    f(xi) = A xi^(-(2s+1-1/beta)) exp(-G xi^s / (beta s)); since beta*s > 0
    and s < 0 the exponential wins every power and f -> 0 faster than any
    power as xi -> 0+, which is the value returned at xi = 0.
    """
    if s >= 0.0 or beta >= 0.0:
        raise ValidationError("origin_profile_negative needs s < 0 and beta < 0")
    if xi < 0.0:
        raise ValidationError(f"xi must be nonnegative, got {xi!r}")
    if xi == 0.0 or amplitude == 0.0:
        return 0.0
    power = 2.0 * s + 1.0 - 1.0 / beta
    exponent = -power * math.log(xi) - G * xi ** s / (beta * s)
    if exponent < -745.0:
        return 0.0
    if exponent > 709.0:
        raise ParameterRangeError(
            f"origin_profile_negative overflows at xi={xi!r} (exponent {exponent:.3g})")
    return amplitude * math.exp(exponent)


def perturbation_exponent(eps, beta):
    """Growth exponent of the power-law perturbation near the origin, 0 < eps < 1/2.

    Root of the linearized perturbation balance:
    alpha = (sqrt(eps^2 b^2 + 8 eps b + 4) + eps b - 2) / (2 b), b = |beta|,
    which behaves as eps + O(eps^2) for small eps.
    """
    b = abs(beta)
    disc = (eps * b) ** 2 + 8.0 * eps * b + 4.0
    if disc < 0.0:
        raise ValidationError(f"negative discriminant for eps={eps!r}, beta={beta!r}")
    return (math.sqrt(disc) + eps * b - 2.0) / (2.0 * b)


def perturbation_residual(alpha, eps, beta, amplitude):
    """Residual of the exact transcendental equation for the perturbation exponent.

    Returns (1/|beta| + alpha) - A (1/|beta|) Gamma(alpha-eps) Gamma(-eps)
    / Gamma(alpha-2 eps); zero exactly at the true exponent.  Gamma poles in
    any argument surface as domain errors.
    """
    b = abs(beta)
    lhs = 1.0 / b + alpha
    rhs = amplitude / b * gamma_fn(alpha - eps) * gamma_fn(-eps) / gamma_fn(alpha - 2.0 * eps)
    return lhs - rhs


def eps_expansion_G(eps):
    """First-order expansion of the gauge moment: G = 2 + (2g + 4pi^2/3 - 8) eps.

    Describes the first-moment-2 profile; documented validity |eps| <= 0.2.
    """
    return 2.0 + G_EPS_COEFF * eps


def eps_expansion_a(eps):
    """First-order expansion of the origin amplitude of the first-moment-2 profile.

    a = 2 + (4g^2 - 16g + (8/3) g pi^2 + 2 pi^2 - 12) eps.
    """
    return 2.0 + A_EPS_COEFF * eps


def lognormal_mid(xi, eps, a):
    """Lognormal-like intermediate region for eps < 0.

    a * exp(eps (log xi)^2 + eps (2g + 4pi^2/3 - 4) log xi): a Gaussian in
    log xi, decaying on both sides for eps < 0.
    """
    if xi <= 0.0:
        raise ValidationError(f"lognormal_mid needs xi > 0, got xi={xi!r}")
    u = math.log(xi)
    return a * math.exp(eps * u * u + eps * LOGNORMAL_LIN_COEFF * u)


def gaussian_limit_profile(xi, n, form="power"):
    """Large-n similarity profile for the kernel (xy)^(-n).

    ``form="power"`` evaluates (8/(e sqrt(pi))) sqrt(n) 4^n xi^n e^(-4n xi/e),
    whose maximum sits at xi = e/4 with height growing like sqrt(n).
    ``form="peak"`` evaluates the local Gaussian companion
    (8/(e sqrt(pi))) sqrt(n) exp(-n (xi - e/4)^2 / 2).
    """
    if n < 1 or int(n) != n:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    if xi <= 0.0:
        raise ValidationError(f"xi must be positive, got {xi!r}")
    front = 8.0 / (math.e * math.sqrt(math.pi)) * math.sqrt(n)
    if form == "peak":
        return front * math.exp(-0.5 * n * (xi - math.e / 4.0) ** 2)
    if form != "power":
        raise ValidationError(f"form must be 'power' or 'peak', got {form!r}")
    exponent = n * math.log(4.0) + n * math.log(xi) - 4.0 * n * xi / math.e
    if exponent < -745.0:
        return 0.0
    return front * math.exp(exponent)


# --- Laplace-transform side -------------------------------------------------
#
# lambda >= 0 throughout.  base is the transform (e^{-lam x} - 1 weight) of
# the constant-kernel profile 2 e^{-xi}; base_log is its log-moment
# companion; correction is the first-order term in the kernel exponent.

def laplace_base(lam):
    """g(lam) = -2 lam / (1 + lam)."""
    return -2.0 * lam / (1.0 + lam)


def laplace_base_deriv(lam):
    """d/dlam of laplace_base: -2/(1+lam)^2."""
    return -2.0 / (1.0 + lam) ** 2


def laplace_base_log(lam):
    """2 * int (e^{-lam x} - 1) log(x) e^{-x} dx = -2(g + log(1+lam))/(1+lam) + 2g."""
    return -2.0 * (EULER_GAMMA + math.log1p(lam)) / (1.0 + lam) + 2.0 * EULER_GAMMA


def laplace_correction(lam):
    """First-order correction: -4(g+1) lam^2/(1+lam)^2 - 4 lam Li2(-lam)/(1+lam)^2."""
    w = (1.0 + lam) ** 2
    return -4.0 * (EULER_GAMMA + 1.0) * lam * lam / w - 4.0 * lam * dilog(-lam) / w


def laplace_correction_deriv(lam):
    """Analytic derivative of laplace_correction.

    Uses Li2'(z) = -log(1-z)/z; assembled by hand rather than differenced
    because the compatibility residual must vanish to 1e-8.
    """
    w3 = (1.0 + lam) ** 3
    return (-8.0 * (EULER_GAMMA + 1.0) * lam / w3
            - 4.0 * (1.0 - lam) * dilog(-lam) / w3
            + 4.0 * math.log1p(lam) / (1.0 + lam) ** 2)


def compatibility_residual(lam, B):
    """Residual of the first-order Laplace equation as a function of B.

    The correction term solves
        -g1 + lam g1' - g0 g1 = g0 g0log + 2 g0 + B lam g0'
    only when B = -2; for other B the source keeps an unmatched part
    -(2B+4) lam + O(lam^2).  Returned as source minus operator so that
    residual(lam, B)/lam -> -(2B+4) as lam -> 0+ and residual(., -2) == 0.
    """
    g0 = laplace_base(lam)
    source = g0 * laplace_base_log(lam) + 2.0 * g0 + B * lam * laplace_base_deriv(lam)
    g1 = laplace_correction(lam)
    operator = -g1 + lam * laplace_correction_deriv(lam) - g0 * g1
    return source - operator
