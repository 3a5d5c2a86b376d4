"""Global self-similar profiles for kernel exponents s < 0.

The profile solves a nonlinear Volterra-type integral equation that is
marched node by node on a uniform grid in the similarity variable xi: at
each node the pair convolution Q only uses values already computed, so a
single forward sweep produces f for given (s, beta, G, a).  The two free
constants are then fixed by shooting: a is bisected so the solution stays
nonnegative with f(L) -> 0, and beta is adjusted until the measured gauge
moment int xi^s f dxi returns the prescribed G.

The deep origin layer decays faster than any power; it is handled in log
space and stored as exact zeros below the floating underflow threshold.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.interpolate import PchipInterpolator
from scipy.special import gammaincc

from .exceptions import (BracketError, NonConvergenceError,
                         ParameterRangeError, ValidationError)
from .specfun import gamma_fn
from .asymptotics import G_EPS_COEFF


@dataclass(frozen=True)
class ProfileGrid:
    """Uniform grid xi_i = i*h, i = 1..n (the origin itself is not a node)."""

    h: float
    n: int

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValidationError(f"grid step must be positive, got {self.h!r}")
        if self.n < 16:
            raise ValidationError(f"grid needs at least 16 nodes, got {self.n!r}")

    @property
    def length(self):
        return self.h * self.n

    def nodes(self):
        return self.h * np.arange(1, self.n + 1)


def default_grid(s):
    """Default domains: L=40 for |s| <= 1; L=5 for the concentrated |s| > 1 profiles."""
    if abs(s) <= 1.0:
        return ProfileGrid(h=0.005, n=8000)
    return ProfileGrid(h=5.0 / 8000.0, n=8000)


@dataclass
class SimilarityProfile:
    """Profile values on a ProfileGrid together with the parameters that generated them."""

    grid: ProfileGrid
    f: np.ndarray
    s: float
    beta: float
    G: float
    a: float
    _moment_cache: dict = field(default_factory=dict, repr=False, compare=False)


@dataclass(frozen=True)
class ShooterReport:
    a_star: float
    beta_star: float
    g_out: float
    inner_iterations: int
    outer_iterations: int
    residual: float


# --- forward march ----------------------------------------------------------

@njit(cache=True)
def _march_kernel(u, f, xs, pref, npref_log, h, a, stop_on_negative):
    """March the integral equation over the grid, in place.

    u and f are zeroed buffers of length n; xs holds xi^s, pref the
    positive prefactor (0 where underflowed), npref_log the log of
    1/(2|beta| * pref).  Returns (status, first_negative_index) with status
    0 = completed, 1 = stopped at first negative, 2 = overflow.
    """
    n = f.shape[0]
    J = 0.0
    w_prev = 0.0
    first_neg = -1
    for i0 in range(n):
        i = i0 + 1
        # pair convolution Q_i = h * sum_{j=1}^{i-1} u_j u_{i-j}, symmetric half-sum
        q = 0.0
        half = (i - 1) // 2
        for j in range(1, half + 1):
            q += u[j - 1] * u[i - j - 1]
        q *= 2.0
        if i % 2 == 0:
            um = u[i // 2 - 1]
            q += um * um
        q *= h
        if q == 0.0:
            w = 0.0
        else:
            lw = npref_log[i0] + math.log(abs(q))
            if lw > 705.0:
                return 2, first_neg
            # integrand of the bracket integral: Q/(2 beta pref), beta < 0
            w = -math.copysign(math.exp(lw), q)
        J += 0.5 * h * (w_prev + w)
        w_prev = w
        fi = pref[i0] * (a + J)
        f[i0] = fi
        u[i0] = xs[i0] * fi
        if fi < 0.0:
            if first_neg < 0:
                first_neg = i0
            if stop_on_negative:
                return 1, first_neg
        if abs(fi) > 1e280:
            return 2, first_neg
    return 0, first_neg


def _prefactors(s, beta, G, grid):
    """Per-node factors of the marched representation, in log space.

    Integrating the similarity balance with the factor
    mu(xi) = xi^p exp(G xi^s/(beta s)), p = 2s + 1 - 1/beta, gives
    f = pref * (a + J) with pref = 1/mu (normalized to exp(G/(beta s)) at
    xi = 1) and J(xi) = int_0^xi eta^(p-1) e^(G(eta^s - 1)/(beta s))
    Q(eta)/(2 beta) deta, so the bracket integrand equals
    Q/(2 beta eta pref(eta)).
    """
    if s >= 0.0 or beta >= 0.0:
        raise ValidationError("march needs s < 0 and beta < 0 (so beta*s > 0)")
    if G <= 0.0:
        raise ValidationError(f"gauge moment G must be positive, got {G!r}")
    xi = grid.nodes()
    xs = xi ** s
    logxi = np.log(xi)
    p = 2.0 * s + 1.0 - 1.0 / beta
    expo = (G / (beta * s)) * (1.0 - xs) - p * logxi
    emax = float(np.max(expo))
    if emax > 709.0:
        raise ParameterRangeError(
            f"profile prefactor overflows (max exponent {emax:.3g}) for "
            f"s={s!r}, beta={beta!r}, G={G!r}")
    pref = np.exp(np.maximum(expo, -745.0))
    pref[expo < -745.0] = 0.0
    npref_log = -expo - logxi - math.log(2.0 * abs(beta))
    return xs, pref, npref_log


def _run_march(a, xs, pref, npref_log, grid, stop_on_negative):
    u = np.zeros(grid.n)
    f = np.zeros(grid.n)
    status, first_neg = _march_kernel(u, f, xs, pref, npref_log, grid.h,
                                      float(a), stop_on_negative)
    if status == 2:
        raise ParameterRangeError(
            f"march left the representable range at a={a!r}")
    return f, first_neg


def march_profile(s, beta, G, a, grid):
    """March the integral equation once; negative values are stored as-is."""
    xs, pref, npref_log = _prefactors(s, beta, G, grid)
    f, _ = _run_march(a, xs, pref, npref_log, grid, stop_on_negative=False)
    return SimilarityProfile(grid=grid, f=f, s=s, beta=beta, G=G, a=a)


def convolution_at(profile, i):
    """Pair convolution Q(xi_i) = int_0^{xi_i} (xi_i-eta)^s eta^s f(xi_i-eta) f(eta) deta.

    Trapezoid on the uniform grid; both endpoint contributions vanish
    because f decays faster than any power at the origin for s < 0.
    """
    n = profile.grid.n
    if not 1 <= i <= n:
        raise ValidationError(f"node index {i!r} outside 1..{n}")
    if i == 1:
        return 0.0
    xi = profile.grid.nodes()
    u = xi ** profile.s * profile.f
    return profile.grid.h * float(np.dot(u[0:i - 1], u[i - 2::-1]))


# --- shooting ---------------------------------------------------------------

_SCAN_LO, _SCAN_HI = 1e-6, 1e6


def shoot_amplitude(s, beta, G, grid, a_rtol=1e-10, a_seed=None):
    """Bisect the amplitude a so the marched profile stays nonnegative and f(L) -> 0.

    The sentinel is f(L) when the march stays nonnegative and the first
    negative value otherwise; small a gives the slowly decaying positive
    branch, large a drives the solution negative, and the similarity
    profile sits on the sign change.
    """
    xs, pref, npref_log = _prefactors(s, beta, G, grid)
    inner = 0

    def sentinel(a):
        nonlocal inner
        inner += 1
        f, first_neg = _run_march(a, xs, pref, npref_log, grid,
                                  stop_on_negative=True)
        if first_neg >= 0:
            return f[first_neg], None
        return f[-1], f

    # locate a sign change by geometric scan
    a_pos = a_neg = None
    f_pos = None
    start = a_seed if a_seed is not None else 1.0
    start = min(max(start, _SCAN_LO), _SCAN_HI)
    a = start
    s_val, f_full = sentinel(a)
    direction_up = s_val >= 0.0
    if s_val >= 0.0:
        a_pos, f_pos = a, f_full
    else:
        a_neg = a
    while a_pos is None or a_neg is None:
        a = a * 4.0 if direction_up else a / 4.0
        if not _SCAN_LO / 4.0 <= a <= _SCAN_HI * 4.0:
            raise BracketError(
                f"no sign change of the shooting sentinel for a in "
                f"[{_SCAN_LO:g}, {_SCAN_HI:g}] at s={s!r}, beta={beta!r}, G={G!r}")
        s_val, f_full = sentinel(a)
        if s_val >= 0.0:
            a_pos, f_pos = a, f_full
        else:
            a_neg = a

    # bisection to relative width a_rtol; the nonnegative side is the answer
    while abs(a_neg - a_pos) > a_rtol * 0.5 * (a_pos + a_neg):
        mid = 0.5 * (a_pos + a_neg)
        if mid == a_pos or mid == a_neg:
            break
        s_val, f_full = sentinel(mid)
        if s_val >= 0.0:
            a_pos, f_pos = mid, f_full
        else:
            a_neg = mid

    profile = SimilarityProfile(grid=grid, f=f_pos, s=s, beta=beta, G=G, a=a_pos)
    return a_pos, profile, inner


def moment(profile, order):
    """Grid quadrature of xi^order f(xi); trapezoid with a zero origin value."""
    cache = profile._moment_cache
    if order in cache:
        return cache[order]
    xi = profile.grid.nodes()
    w = xi ** order * profile.f
    val = profile.grid.h * (float(np.sum(w[:-1])) + 0.5 * float(w[-1]))
    cache[order] = val
    return val


def gauge_moment(profile):
    """Measured gauge moment int_0^L xi^s f dxi.

    The contribution below the first node is dropped: the integrand
    vanishes there faster than any power for s < 0.
    """
    return moment(profile, profile.s)


def fit_tail(profile, window=(0.5, 0.75)):
    """Fit log f = c0 + q log xi - rate * xi on a tail window (fractions of L).

    Returns (c0, q, rate).  The power q probes the xi^(-2s) tail factor and
    the rate fixes the exponential gauge of the profile.
    """
    n = profile.grid.n
    i0, i1 = int(window[0] * n), int(window[1] * n)
    xi = profile.grid.nodes()[i0:i1]
    fv = profile.f[i0:i1]
    good = fv > 0.0
    if np.count_nonzero(good) < 8:
        raise ValidationError("tail window has too few positive values to fit")
    xi, fv = xi[good], fv[good]
    A = np.column_stack([np.ones_like(xi), np.log(xi), -xi])
    coef, *_ = np.linalg.lstsq(A, np.log(fv), rcond=None)
    return float(coef[0]), float(coef[1]), float(coef[2])


def _tail_extension(profile, order):
    """int_L^inf xi^order f dxi estimated from the fitted Gamma-form tail."""
    try:
        c0, q, rate = fit_tail(profile)
    except ValidationError:
        return 0.0
    if rate <= 0.0:
        return 0.0
    shape = order + q + 1.0
    if shape <= 0.0:
        return 0.0
    L = profile.grid.length
    return math.exp(c0) * rate ** (-shape) * gammaincc(shape, rate * L) * gamma_fn(shape)


def profile_residual(profile):
    """Max pointwise defect of the similarity balance, normalized by max f.

    Both sides are discretized on interior nodes: centered difference for
    f', the pair convolution by quadrature, and the half-line integral
    closed with the fitted Gamma tail beyond the grid.  Underflowed leading
    nodes are excluded.
    """
    from scipy.signal import fftconvolve

    s, beta = profile.s, profile.beta
    grid = profile.grid
    xi = grid.nodes()
    f = profile.f
    xs = xi ** s
    u = xs * f
    conv = fftconvolve(u, u)  # index m <-> node m+2
    Q = np.zeros(grid.n)
    Q[1:] = grid.h * conv[0:grid.n - 1]
    g_full = gauge_moment(profile) + _tail_extension(profile, s)
    alpha = (2.0 * s + 1.0) * beta - 1.0

    df = (f[2:] - f[:-2]) / (2.0 * grid.h)
    lhs = alpha * f[1:-1] + beta * xi[1:-1] * df
    rhs = 0.5 * Q[1:-1] - xs[1:-1] * f[1:-1] * g_full
    valid = (f[:-2] > 0.0) & (f[1:-1] > 0.0) & (f[2:] > 0.0)
    if not np.any(valid):
        return 0.0
    fmax = float(np.max(np.abs(f)))
    if fmax == 0.0:
        return 0.0
    return float(np.max(np.abs(lhs[valid] - rhs[valid]))) / fmax


def scale_profile(profile, ell):
    """Apply the one-parameter family f -> ell^(1+2s) f(ell xi), resampled to the grid.

    The generating parameters transform along: G -> G ell^s and
    a -> a ell^(1/beta) exp(G (1 - ell^s)/(beta s)).
    """
    if ell <= 0.0:
        raise ValidationError(f"scale factor must be positive, got {ell!r}")
    s, beta = profile.s, profile.beta
    if ell == 1.0:
        return SimilarityProfile(grid=profile.grid, f=profile.f.copy(), s=s,
                                 beta=beta, G=profile.G, a=profile.a)
    xi = profile.grid.nodes()
    interp = PchipInterpolator(np.concatenate(([0.0], xi)),
                               np.concatenate(([0.0], profile.f)),
                               extrapolate=False)
    target = ell * xi
    fnew = ell ** (1.0 + 2.0 * s) * np.nan_to_num(interp(target), nan=0.0)
    g_new = profile.G * ell ** s
    if s == 0.0:
        a_new = profile.a * ell ** ((1.0 - profile.G) / beta)
    else:
        a_new = (profile.a * ell ** (1.0 / beta)
                 * math.exp(profile.G * (1.0 - ell ** s) / (beta * s)))
    return SimilarityProfile(grid=profile.grid, f=fnew, s=s, beta=beta,
                             G=g_new, a=a_new)


def normalize_first_moment(profile, target):
    """Rescale along the family so the measured first moment equals target.

    A couple of secant corrections absorb the resampling quadrature error;
    each candidate is resampled from the original profile, never from a
    previous resample.
    """
    if target <= 0.0:
        raise ValidationError(f"target first moment must be positive, got {target!r}")
    m1 = moment(profile, 1.0)
    if m1 <= 0.0:
        raise ValidationError("cannot normalize a profile with nonpositive first moment")
    expo = 1.0 / (1.0 - 2.0 * profile.s)
    ell = (m1 / target) ** expo
    if ell == 1.0:
        return scale_profile(profile, 1.0)
    best = scale_profile(profile, ell)
    for _ in range(8):
        m = moment(best, 1.0)
        if abs(m / target - 1.0) <= 1e-9:
            break
        ell *= (m / target) ** expo
        best = scale_profile(profile, ell)
    return best


def solve_similarity(s, grid=None, g_target=2.0, a_rtol=1e-10, g_rtol=1e-6,
                     max_outer=100, bracket_width=0.5):
    """Two-parameter shooting: select (a, beta) so f >= 0, f(L) -> 0 and G_out = G.

    The outer scalar root-find on beta runs a secant/bisection hybrid on
    R(beta) = G_out(beta) - g_target, bracketed around the moment-selected
    value -1/(1-2s); the inner amplitude shoot supplies G_out per beta.
    """
    if s >= 0.0:
        raise ValidationError(f"solve_similarity needs s < 0, got s={s!r}")
    if grid is None:
        grid = default_grid(s)
    beta0 = -1.0 / (1.0 - 2.0 * s)
    lo, hi = (1.0 + bracket_width) * beta0, (1.0 - bracket_width) * beta0
    inner_total = 0
    seed = None

    def evaluate(beta):
        nonlocal inner_total, seed
        a_star, profile, inner = shoot_amplitude(s, beta, g_target, grid,
                                                 a_rtol=a_rtol, a_seed=seed)
        inner_total += inner
        seed = a_star
        return gauge_moment(profile) - g_target, a_star, profile

    r_lo, a_lo_, p_lo = evaluate(lo)
    if abs(r_lo) <= g_rtol * g_target:
        report = ShooterReport(a_lo_, lo, r_lo + g_target, inner_total, 1,
                               abs(r_lo) / g_target)
        return report, p_lo
    r_hi, a_hi_, p_hi = evaluate(hi)
    if r_lo * r_hi > 0.0:
        raise BracketError(
            f"gauge residual does not change sign on beta bracket "
            f"[{lo:.6g}, {hi:.6g}] for s={s!r} (R={r_lo:.3g}, {r_hi:.3g})")

    pts = [(lo, r_lo), (hi, r_hi)]
    best = (hi, r_hi, a_hi_, p_hi) if abs(r_hi) < abs(r_lo) else (lo, r_lo, a_lo_, p_lo)
    for outer in range(2, max_outer + 1):
        if abs(best[1]) <= g_rtol * g_target:
            beta_star, r, a_star, profile = best
            report = ShooterReport(a_star, beta_star, r + g_target,
                                   inner_total, outer, abs(r) / g_target)
            return report, profile
        (b1, r1), (b2, r2) = pts[-2], pts[-1]
        width = hi - lo
        cand = None
        if r2 != r1:
            cand = b2 - r2 * (b2 - b1) / (r2 - r1)
        if cand is None or not (lo + 0.01 * width < cand < hi - 0.01 * width):
            cand = 0.5 * (lo + hi)
        r_c, a_c, p_c = evaluate(cand)
        pts.append((cand, r_c))
        if abs(r_c) < abs(best[1]):
            best = (cand, r_c, a_c, p_c)
        if r_c * r_lo <= 0.0:
            hi, r_hi = cand, r_c
        else:
            lo, r_lo = cand, r_c
    raise NonConvergenceError(
        f"beta iteration did not reach |G_out - G| <= {g_rtol:g}*G in "
        f"{max_outer} steps for s={s!r}")


def _coarse_grid(grid, factor=4):
    n = max(16, grid.n // factor)
    return ProfileGrid(h=grid.length / n, n=n)


def calibrate_gauge(s, grid, g_start=None, moment_tol=0.1, first_moment=2.0,
                    probe_factor=4):
    """Pick a gauge target G whose family member has first moment near 2.

    The gauge moment varies only like ell^s along the scale family, so for
    small |s| a fixed G target can select a member stretched or compressed
    by an enormous factor relative to the domain, leaving the shooting
    problem badly conditioned.  The first moment is a much steeper
    (ell^(2s-1)) and monotone function of the gauge, so bisecting
    log M1(G) - log(target) over log G on a coarsened probe grid lands on
    a well-scaled member in a handful of cheap shots; the exact
    normalization happens later on the full solution.
    """
    beta0 = -1.0 / (1.0 - 2.0 * s)
    probe_grid = _coarse_grid(grid, probe_factor) if probe_factor > 1 else grid
    if g_start is None:
        g_start = 2.0 * math.exp(0.5 * G_EPS_COEFF * s) if s > -0.45 else 2.0

    def log_m1_defect(x):
        try:
            _, prof, _ = shoot_amplitude(s, beta0, math.exp(x), probe_grid, a_rtol=1e-8)
        except (ParameterRangeError, BracketError):
            return -math.inf  # treat like an over-compressed member
        m1 = moment(prof, 1.0)
        if m1 <= 0.0:
            return -math.inf
        return math.log(m1 / first_moment)

    x_cur = math.log(g_start)
    k_cur = log_m1_defect(x_cur)
    step = -1.0 if k_cur > 0.0 else 1.0  # M1 increases with G
    x_next, k_next = x_cur, k_cur
    for _ in range(40):
        if k_next == 0.0 or k_next * k_cur < 0.0:
            break
        x_cur, k_cur = x_next, k_next
        x_next = x_cur + step
        k_next = log_m1_defect(x_next)
    else:
        raise BracketError(f"gauge calibration found no bracket for s={s!r}")
    x_lo, x_hi = min(x_cur, x_next), max(x_cur, x_next)
    xm = 0.5 * (x_lo + x_hi)
    for _ in range(25):
        xm = 0.5 * (x_lo + x_hi)
        km = log_m1_defect(xm)
        if abs(km) <= moment_tol:
            break
        if km > 0.0:
            x_hi = xm
        else:
            x_lo = xm
    return math.exp(xm)


def solve_normalized(s, grid=None, first_moment=2.0, g_start=None, **kwargs):
    """Calibrated solve returning the first-moment-normalized profile.

    Calibrates the gauge on a coarsened grid (falling back to the full
    grid if the outer bracket then fails), solves at full resolution, and
    rescales exactly to the requested first moment.  The returned profile
    carries the G and a of the normalized gauge.
    """
    if grid is None:
        grid = default_grid(s)
    g_tgt = calibrate_gauge(s, grid, g_start=g_start, first_moment=first_moment)
    try:
        report, profile = solve_similarity(s, grid, g_target=g_tgt, **kwargs)
    except BracketError:
        g_tgt = calibrate_gauge(s, grid, g_start=g_tgt, first_moment=first_moment,
                                probe_factor=1)
        report, profile = solve_similarity(s, grid, g_target=g_tgt, **kwargs)
    return report, normalize_first_moment(profile, first_moment)
