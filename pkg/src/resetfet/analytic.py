"""Closed forms for drifted Brownian motion with resetting on an interval.

Every public function takes a :class:`~resetfet.core.ResettingParams` and
positions in the original coordinates of ``(a, b)``; internally the interval
is shifted to ``(0, L)`` with ``L = b - a``.  Positions may be numpy arrays.

Conventions used in the docstrings: ``beta0 = sqrt(mu^2 + 2r)``,
``beta = sqrt(mu^2 + 2(lam + r))``, ``k = sqrt(2r)`` (undrifted case).
When ``r`` (or ``mu``) is below :data:`~resetfet.core.ZERO_TOL` the explicit
no-reset (no-drift) limit formulas are used instead of the general ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._numdiff import derivative, richardson_limit
from ._stable import as_output, common_shift, ecosh, esinh, expm1_ratio
from .core import ZERO_TOL, ResettingParams, translate_to_origin
from .errors import DegenerateConditioning, DomainError, NumericalError

__all__ = [
    "ExitLaw",
    "MomentSet",
    "exit_prob_left",
    "exit_prob_right",
    "exit_law",
    "survival_lt",
    "survival_lt_undrifted",
    "fet_lt",
    "fet_lt_undrifted",
    "fet_lt_at_reset",
    "fet_lt_darling_siegert",
    "fet_mean",
    "fet_second_moment",
    "fet_moments",
    "fet_moment_numeric",
    "fea_constants",
    "fea_mean_undrifted",
    "fea_second_moment_constants",
    "fea_second_moment_undrifted",
    "fea_moments_undrifted",
    "JointMomentTerms",
    "joint_moment_terms",
    "joint_moment_tau_area_undrifted",
    "cov_tau_area_undrifted",
    "max_exit_joint_cdf",
    "max_conditional_cdf",
    "max_conditional_density_at_reset",
    "min_exit_joint_survival",
    "min_conditional_survival",
]

_CONDITIONING_FLOOR = 1e-14
# 2/r^3-type cancellations need this many digits for r ~ 1e-6.
_LIMIT_DPS = 80
_LIMIT_R0 = 1e-6
_LIMIT_LEVELS = 6
# Below these values of r b^2 the explicit forms cancel badly in double
# precision and are evaluated with mpmath instead.
_SMALL_R_FET = 5e-2
_SMALL_R_FEA = 0.5


@dataclass(frozen=True)
class ExitLaw:
    p_left: float
    p_right: float


@dataclass(frozen=True)
class MomentSet:
    """First two moments and the variance of a first-exit functional."""

    mean: float
    second: float

    @property
    def variance(self) -> float:
        return self.second - self.mean**2


def _open_check(x, L, name="x"):
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0) or np.any(xs >= L):
        raise DomainError(f"{name} must lie in the open interval (0, {L})")


def _undrifted_only(p: ResettingParams):
    if abs(p.mu) >= ZERO_TOL:
        raise DomainError("closed forms for the first-exit area exist only for mu = 0")


# --------------------------------------------------------------------- exit law


def _pi_left(L, x, xr, mu, r):
    """Left-exit probability on ``(0, L)``; ``x, xr`` already shifted."""
    x = np.asarray(x, dtype=float)
    if r < ZERO_TOL:
        if abs(mu) < ZERO_TOL:
            return (L - x) / L
        # (e^{2(L-x)mu} - 1) / (e^{2L mu} - 1)
        if mu > 0:
            return np.exp(-2 * mu * x) * expm1_ratio(2 * mu * (L - x), 2 * mu * L)
        return np.expm1(2 * mu * (L - x)) / np.expm1(2 * mu * L)
    b0 = math.sqrt(mu * mu + 2 * r)
    t1 = (0.0, (L - xr) * b0)
    t2 = (mu * (L - x), (xr - x) * b0)
    t3 = (L * mu, xr * b0)
    s = common_shift(t1, t2, t3)
    num = esinh(*t1, s) + esinh(*t2, s)
    den = esinh(*t1, s) + esinh(*t3, s)
    return num / den


def _pi_right(L, x, xr, mu, r):
    x = np.asarray(x, dtype=float)
    if r < ZERO_TOL:
        return 1.0 - _pi_left(L, x, xr, mu, r)
    b0 = math.sqrt(mu * mu + 2 * r)
    t1 = (0.0, (L - xr) * b0)
    t2 = (mu * (L - x), (xr - x) * b0)
    t3 = (L * mu, xr * b0)
    s = common_shift(t1, t2, t3)
    num = esinh(*t3, s) - esinh(*t2, s)
    den = esinh(*t1, s) + esinh(*t3, s)
    return num / den


def exit_prob_left(params: ResettingParams, x):
    """Probability that the first exit from ``(a, b)`` happens at ``a``."""
    p, xs = translate_to_origin(params, x)
    return as_output(_pi_left(p.b, xs, p.x_reset, p.mu, p.r), x)


def exit_prob_right(params: ResettingParams, x):
    """Probability that the first exit happens at ``b``."""
    p, xs = translate_to_origin(params, x)
    return as_output(_pi_right(p.b, xs, p.x_reset, p.mu, p.r), x)


def exit_law(params: ResettingParams, x) -> ExitLaw:
    return ExitLaw(exit_prob_left(params, x), exit_prob_right(params, x))


# --------------------------------------------------------- Laplace transforms


def _lam_array(lam):
    lam_arr = np.asarray(lam)
    if not np.iscomplexobj(lam_arr):
        lam_arr = lam_arr.astype(float)
    return lam_arr


def _beta(mu, r, lam):
    arg = mu * mu + 2.0 * (lam + r)
    if not np.iscomplexobj(arg) and np.any(arg < 0):
        arg = arg.astype(complex)
    return np.sqrt(arg)


def _q_terms(L, x, xr, mu, r, lam):
    """Exponent pairs of the survival-transform numerator and denominator."""
    beta = _beta(mu, r, lam)
    n1 = (-L * mu, L * beta)
    n2 = (-(L + x) * mu, (L - x) * beta)
    n3 = (-mu * x, x * beta)
    d2 = (-(L + xr) * mu, (L - xr) * beta)
    d3 = (-xr * mu, xr * beta)
    return n1, n2, n3, d2, d3


def _survival_lt(L, x, xr, mu, r, lam):
    n1, n2, n3, d2, d3 = _q_terms(L, x, xr, mu, r, lam)
    s = common_shift(n1, n2, n3, d2, d3)
    num = esinh(*n1, s) - esinh(*n2, s) - esinh(*n3, s)
    den = lam * esinh(*n1, s) + r * esinh(*d2, s) + r * esinh(*d3, s)
    return num / den


def _fet_lt(L, x, xr, mu, r, lam):
    x = np.asarray(x, dtype=float)
    lam = _lam_array(lam)
    n1, n2, n3, d2, d3 = _q_terms(L, x, xr, mu, r, lam)
    s = common_shift(n1, n2, n3, d2, d3)
    if r < ZERO_TOL:
        # lam cancels between numerator and denominator
        num = esinh(*n2, s) + esinh(*n3, s)
        den = esinh(*n1, s)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = num / den
        return np.where(np.abs(lam) == 0, 1.0, out) if np.any(lam == 0) else out
    # 1 - lam*Q written without the subtraction
    num = r * esinh(*d2, s) + r * esinh(*d3, s) + lam * esinh(*n2, s) + lam * esinh(*n3, s)
    den = lam * esinh(*n1, s) + r * esinh(*d2, s) + r * esinh(*d3, s)
    return num / den


def _check_lam(lam):
    lam_arr = np.asarray(lam)
    if np.iscomplexobj(lam_arr):
        return
    if np.any(lam_arr <= 0) or np.any(~np.isfinite(lam_arr)):
        raise DomainError("Laplace variable must be positive")


def survival_lt(params: ResettingParams, x, lam):
    """Laplace transform in ``t`` of ``P[tau(x) > t]``, for ``lam > 0``."""
    _check_lam(lam)
    p, xs = translate_to_origin(params, x)
    return as_output(_survival_lt(p.b, np.asarray(xs, float), p.x_reset, p.mu, p.r, _lam_array(lam)), x, lam)


def survival_lt_undrifted(params: ResettingParams, x, lam):
    """The ``mu = 0`` survival transform written with ``alpha = sqrt(2(lam + r))``."""
    _check_lam(lam)
    p, xs = translate_to_origin(params, x)
    L, xr, r = p.b, p.x_reset, p.r
    alpha = np.sqrt(2.0 * (_lam_array(lam) + r))
    xs = np.asarray(xs, float)
    num = np.sinh(alpha * L) - np.sinh(alpha * xs) - np.sinh(alpha * (L - xs))
    den = lam * np.sinh(alpha * L) + r * np.sinh(alpha * xr) + r * np.sinh(alpha * (L - xr))
    return as_output(num / den, x, lam)


def fet_lt(params: ResettingParams, x, lam):
    """``E[exp(-lam * tau(x))]``.

    Defined for ``lam`` in a left neighbourhood of 0 as well; complex ``lam``
    is accepted (the transform is analytic there), which the contour
    inversion relies on.  ``fet_lt(x, 0) == 1``.
    """
    lam_arr = np.asarray(lam)
    if not np.iscomplexobj(lam_arr) and np.any(~np.isfinite(lam_arr)):
        raise DomainError("Laplace variable must be finite")
    p, xs = translate_to_origin(params, x)
    out = _fet_lt(p.b, xs, p.x_reset, p.mu, p.r, _lam_array(lam))
    if not np.iscomplexobj(lam_arr) and np.iscomplexobj(out):
        out = np.real(out)
    return as_output(out, x, lam)


def fet_lt_undrifted(params: ResettingParams, x, lam):
    """The ``mu = 0`` transform in its own explicit form."""
    p, xs = translate_to_origin(params, x)
    L, xr, r = p.b, p.x_reset, p.r
    lam = _lam_array(lam)
    alpha = np.sqrt(2.0 * (lam + r))
    xs = np.asarray(xs, float)
    num = r * np.sinh(alpha * xr) + r * np.sinh(alpha * (L - xr)) + lam * np.sinh(alpha * xs) + lam * np.sinh(alpha * (L - xs))
    den = lam * np.sinh(alpha * L) + r * np.sinh(alpha * xr) + r * np.sinh(alpha * (L - xr))
    return as_output(num / den, x, lam)


def fet_lt_at_reset(params: ResettingParams, lam):
    """Transform of ``tau(x_R)`` in the dedicated form for a start at the reset point."""
    p, _ = translate_to_origin(params, params.x_reset)
    L, xr, mu, r = p.b, p.x_reset, p.mu, p.r
    lam = _lam_array(lam)
    beta = _beta(mu, r, lam)
    t1 = (-mu * xr, xr * beta)
    t2 = (-mu * xr - L * mu, (L - xr) * beta)
    t3 = (-L * mu, L * beta)
    s = common_shift(t1, t2, t3)
    num = (lam + r) * (esinh(*t1, s) + esinh(*t2, s))
    den = lam * esinh(*t3, s) + r * esinh(*t2, s) + r * esinh(*t1, s)
    return as_output(num / den, lam)


def fet_lt_darling_siegert(b, x, lam):
    """``cosh(sqrt(2 lam)(x - b/2)) / cosh(sqrt(2 lam) b/2)``: no drift, no resetting, interval (0, b)."""
    x = np.asarray(x, dtype=float)
    q = np.sqrt(2.0 * _lam_array(lam))
    s = common_shift((0.0, q * (x - b / 2)), (0.0, q * b / 2))
    return as_output(ecosh(0.0, q * (x - b / 2), s) / ecosh(0.0, q * b / 2, s), x, lam)


# ------------------------------------------------------------------ FET moments


def _small_rate(r, L, threshold):
    return ZERO_TOL <= r and r * L * L < threshold


def _mp_map(fn, x, r, L):
    """Evaluate the scalar mpmath function ``fn(xi)`` over ``x`` with enough digits for ``r b^2``."""
    import mpmath as mp

    dps = 30 + int(3 * math.ceil(-math.log10(r * L * L)))
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    with mp.workdps(dps):
        out = np.array([float(fn(mp.mpf(float(xi)))) for xi in xs.ravel()]).reshape(xs.shape)
    return out if np.ndim(x) else out[0]


def _fet_terms_mp(L, x, xr, mu, r):
    import mpmath as mp

    L, xr, mu, r = (mp.mpf(v) for v in (L, xr, mu, r))
    b0 = mp.sqrt(mu * mu + 2 * r)

    def es(a, z):
        return mp.exp(a) * mp.sinh(z)

    def ec(a, z):
        return mp.exp(a) * mp.cosh(z)

    N = es(-L * mu, L * b0) - es(-mu * x, x * b0) - es(-(L + x) * mu, (L - x) * b0)
    D = r * (es(-xr * mu, xr * b0) + es(-(L + xr) * mu, (L - xr) * b0))
    dN = (L * ec(-L * mu, L * b0) - x * ec(-mu * x, x * b0) - (L - x) * ec(-(L + x) * mu, (L - x) * b0)) / b0
    dD = es(-L * mu, L * b0) + (r / b0) * (xr * ec(-xr * mu, xr * b0) + (L - xr) * ec(-(L + xr) * mu, (L - xr) * b0))
    return N, D, dN, dD


def _fet_mean(L, x, xr, mu, r):
    x = np.asarray(x, dtype=float)
    if _small_rate(r, L, _SMALL_R_FET):
        def one(xi):
            N, D, _, _ = _fet_terms_mp(L, xi, xr, mu, r)
            return N / D

        return _mp_map(one, x, r, L)
    if r < ZERO_TOL:
        if abs(mu) < ZERO_TOL:
            return x * (L - x)
        if abs(mu) * L < _SMALL_R_FET:
            return _mp_map(lambda xi: _fet_mean_no_reset_mp(L, xi, mu), x, mu * mu, L)
        if mu > 0:
            return (L * expm1_ratio(2 * mu * x, 2 * mu * L) - x) / mu
        # reflection x -> L - x, mu -> -mu leaves the law of tau unchanged
        return _fet_mean(L, L - x, L - xr, -mu, r)
    b0 = math.sqrt(mu * mu + 2 * r)
    if abs(mu) < ZERO_TOL and np.ndim(x) == 0 and float(x) == xr:
        k = b0
        t = (0.0, L * k), (0.0, xr * k), (0.0, (L - xr) * k)
        s = common_shift(*t)
        ratio = esinh(*t[0], s) / (esinh(*t[1], s) + esinh(*t[2], s))
        return (ratio - 1.0) / r
    n1 = (-L * mu, L * b0)
    n2 = (-mu * x, x * b0)
    n3 = (-(L + x) * mu, (L - x) * b0)
    k1 = (-xr * mu, xr * b0)
    k2 = (-(L + xr) * mu, (L - xr) * b0)
    s = common_shift(n1, n2, n3, k1, k2)
    num = esinh(*n1, s) - esinh(*n2, s) - esinh(*n3, s)
    den = r * (esinh(*k1, s) + esinh(*k2, s))
    return num / den


def fet_mean(params: ResettingParams, x):
    """``E[tau(x)]``."""
    p, xs = translate_to_origin(params, x)
    return as_output(_fet_mean(p.b, xs, p.x_reset, p.mu, p.r), x)


def _fet_mean_no_reset_mp(L, x, mu):
    import mpmath as mp

    L, mu = mp.mpf(L), mp.mpf(mu)
    return (L * mp.expm1(-2 * mu * x) / mp.expm1(-2 * mu * L) - x) / mu


def _second_moment_no_reset_mp(L, x, mu):
    import mpmath as mp

    L, mu = mp.mpf(L), mp.mpf(mu)
    E = -mp.expm1(-2 * mu * L)

    def particular(y):
        return -2 * L * y * (1 + mp.exp(-2 * mu * y)) / (mu**2 * E) + y**2 / mu**2 - y / mu**3

    return particular(x) - particular(L) * (-mp.expm1(-2 * mu * x)) / E


def _second_moment_no_reset(L, x, mu):
    if abs(mu) < ZERO_TOL:
        return x * (L**3 - 2 * L * x**2 + x**3) / 3.0
    if abs(mu) * L < _SMALL_R_FET:
        return _mp_map(lambda xi: _second_moment_no_reset_mp(L, xi, mu), x, mu * mu, L)
    if mu < 0:
        return _second_moment_no_reset(L, L - x, -mu)
    E = -np.expm1(-2 * mu * L)

    def particular(y):
        return -2 * L * y * (1 + np.exp(-2 * mu * y)) / (mu**2 * E) + y**2 / mu**2 - y / mu**3

    return particular(x) - particular(L) * (-np.expm1(-2 * mu * x)) / E


def _fet_second_moment(L, x, xr, mu, r):
    x = np.asarray(x, dtype=float)
    if r < ZERO_TOL:
        return _second_moment_no_reset(L, x, mu)
    if _small_rate(r, L, _SMALL_R_FET):
        def one(xi):
            N, D, dN, dD = _fet_terms_mp(L, xi, xr, mu, r)
            return 2 * N * dD / D**2 - 2 * dN / D

        return _mp_map(one, x, r, L)
    b0 = math.sqrt(mu * mu + 2 * r)
    n1 = (-L * mu, L * b0)
    n2 = (-mu * x, x * b0)
    n3 = (-(L + x) * mu, (L - x) * b0)
    k1 = (-xr * mu, xr * b0)
    k2 = (-(L + xr) * mu, (L - xr) * b0)
    s = common_shift(n1, n2, n3, k1, k2)
    N = esinh(*n1, s) - esinh(*n2, s) - esinh(*n3, s)
    D = r * (esinh(*k1, s) + esinh(*k2, s))
    # lam-derivatives (d beta / d lam = 1 / beta) at lam = 0
    dN = (L * ecosh(*n1, s) - x * ecosh(*n2, s) - (L - x) * ecosh(*n3, s)) / b0
    dD = esinh(*n1, s) + (r / b0) * (xr * ecosh(*k1, s) + (L - xr) * ecosh(*k2, s))
    return 2.0 * N * dD / D**2 - 2.0 * dN / D


def fet_second_moment(params: ResettingParams, x):
    """``E[tau(x)^2]``."""
    p, xs = translate_to_origin(params, x)
    return as_output(_fet_second_moment(p.b, xs, p.x_reset, p.mu, p.r), x)


def fet_moments(params: ResettingParams, x) -> MomentSet:
    return MomentSet(fet_mean(params, x), fet_second_moment(params, x))


def fet_moment_numeric(params: ResettingParams, x, n: int, *, rtol=1e-4):
    """``E[tau(x)^n]`` as ``(-1)^n d^n/dlam^n E[exp(-lam tau)]`` at ``lam = 0``.

    Central differences on the step ladder ``1e-2 / L^2 * 2^-i`` with
    Richardson extrapolation; raises :class:`NumericalError` when the tableau
    does not settle to ``rtol``.
    """
    if n == 0:
        return 1.0
    if n not in (1, 2, 3, 4):
        raise DomainError(f"moment order must be in 1..4, got {n}")
    p, xs = translate_to_origin(params, x)
    xs = float(xs)
    if xs in (0.0, p.b):
        return 0.0
    L = p.b

    def m(lams):
        return _fet_lt(L, xs, p.x_reset, p.mu, p.r, np.asarray(lams, dtype=complex))

    value, _ = derivative(m, 0.0, n, h0=1e-2 / L**2, rtol=rtol)
    return (-1) ** n * value


# ------------------------------------------------------------------ FEA moments


def _fea_c(L, r, xr, xp):
    k = xp.sqrt(2 * r)
    c3 = (xr * xp.sinh(L * k) - L * xp.sinh(xr * k)) / (r * (xp.sinh((L - xr) * k) + xp.sinh(xr * k)))
    shb = 2 * xp.sinh(L * k)
    c1 = (L / r - c3 * (xp.exp(L * k) - 1)) / shb
    c2 = (-L / r - c3 * (1 - xp.exp(-L * k))) / shb
    return c1, c2, c3, k


def _guard_k(L, r):
    if math.sqrt(2 * r) * L > 340:
        raise NumericalError("b * sqrt(2r) too large for the explicit area formulas (exp overflow)")


def fea_constants(params: ResettingParams):
    """Return ``(c1, c2, c3)`` of the mean-area formula (``mu = 0``, ``r > 0``)."""
    _undrifted_only(params)
    p, _ = translate_to_origin(params, params.x_reset)
    if p.r < ZERO_TOL:
        raise DomainError("the constants c_i are defined for r > 0 only")
    _guard_k(p.b, p.r)
    c1, c2, c3, _ = _fea_c(p.b, p.r, p.x_reset, np)
    return float(c1), float(c2), float(c3)


def _area_eval(func, p, xs):
    if _small_rate(p.r, p.b, _SMALL_R_FEA):
        import mpmath as mp

        return _mp_map(lambda xi: func(mp.mpf(p.b), xi, mp.mpf(p.r), mp.mpf(p.x_reset), mp), xs, p.r, p.b)
    _guard_k(p.b, p.r)
    return func(p.b, xs, p.r, p.x_reset)


def _fea_mean(L, x, r, xr, xp=np):
    c1, c2, c3, k = _fea_c(L, r, xr, xp)
    return c1 * xp.exp(-x * k) + c2 * xp.exp(x * k) + x / r + c3


def fea_mean_undrifted(params: ResettingParams, x):
    """``E[A(x)]`` for ``mu = 0``; at ``r = 0`` it is ``x (b^2 - x^2) / 3`` in shifted coordinates."""
    _undrifted_only(params)
    p, xs = translate_to_origin(params, x)
    xs = np.asarray(xs, dtype=float)
    if p.r < ZERO_TOL:
        out = xs * (p.b**2 - xs**2) / 3.0
    else:
        out = _area_eval(_fea_mean, p, xs)
    return as_output(out, x)


def _fea2_constants(L, r, xr, xp=np):
    c1, c2, c3, k = _fea_c(L, r, xr, xp)
    e = xp.exp
    P = (
        e(-L * k) * c1 / k * (L**2 + L / k)
        - e(L * k) * c2 / k * (L**2 - L / k)
        - 2 / r**3 * (e(L * k) - 1)
        + 2 * L**2 / r**2
        + 2 * c3 * L / r
    )
    Q = (
        e(-xr * k) * c1 / k * (xr**2 + xr / k)
        - e(xr * k) * c2 / k * (xr**2 - xr / k)
        - 2 / r**3 * e(xr * k)
        + 2 * xr**2 / r**2
        + 2 * c3 * xr / r
        + 2 / r**3
    )
    shb, shr = xp.sinh(L * k), xp.sinh(xr * k)
    # d1 and E[A^2(x_R)] are defined through each other; solve the 2x2 system.
    a2r = e(-xr * k) * (Q - shr * P / shb) / (1 - shr / shb * (e(L * k) - 1) * e(-xr * k))
    d1 = (P - (e(L * k) - 1) * a2r) / (2 * shb)
    d2 = -2 / r**3 - a2r - d1
    return d1, d2, a2r, (c1, c2, c3, k)


def _fea_second(L, x, r, xr, xp=np):
    d1, d2, a2r, (c1, c2, c3, k) = _fea2_constants(L, r, xr, xp)
    e = xp.exp
    return (
        e(-x * k) * (d1 + c1 / k * (x**2 + x / k))
        + e(x * k) * (d2 - c2 / k * (x**2 - x / k))
        + 2 * x**2 / r**2
        + 2 * c3 * x / r
        + 2 / r**3
        + a2r
    )


def fea_second_moment_constants(params: ResettingParams):
    """Return ``(d1, d2, E[A^2(x_R)])`` (``mu = 0``, ``r > 0``)."""
    _undrifted_only(params)
    p, _ = translate_to_origin(params, params.x_reset)
    if p.r < ZERO_TOL:
        raise DomainError("the constants d_i are defined for r > 0 only")
    _guard_k(p.b, p.r)
    d1, d2, a2r, _ = _fea2_constants(p.b, p.r, p.x_reset)
    return float(d1), float(d2), float(a2r)


def _limit_r_to_zero(func, L, x, xr):
    """Value at ``r = 0`` of ``func(L, x, r, xr, xp)`` by Richardson extrapolation in ``r``.

    The explicit forms carry ``1/r^3`` terms that cancel, so they are
    evaluated in extended precision on ``r = r0 / 2^j``.
    """
    import mpmath as mp

    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    with mp.workdps(_LIMIT_DPS):
        for i, xi in enumerate(xs):
            vals = [
                func(mp.mpf(L), mp.mpf(float(xi)), mp.mpf(_LIMIT_R0) / 2**j, mp.mpf(xr), mp)
                for j in range(_LIMIT_LEVELS)
            ]
            out[i] = float(richardson_limit(vals, power=1, rtol=1e-10, atol=mp.mpf(10) ** -30))
    return out if np.ndim(x) else out[0]


def fea_second_moment_undrifted(params: ResettingParams, x):
    """``E[A(x)^2]`` for ``mu = 0``.

    The explicit form is undefined at ``r = 0``; there the value is the limit
    ``r -> 0`` obtained by Richardson extrapolation from ``r = 1e-6 * 2^-j``.
    """
    _undrifted_only(params)
    p, xs = translate_to_origin(params, x)
    xs = np.asarray(xs, dtype=float)
    if p.r < ZERO_TOL:
        out = _limit_r_to_zero(_fea_second, p.b, xs, p.x_reset)
    else:
        out = _area_eval(_fea_second, p, xs)
    return as_output(out, x)


def fea_moments_undrifted(params: ResettingParams, x) -> MomentSet:
    return MomentSet(fea_mean_undrifted(params, x), fea_second_moment_undrifted(params, x))


# ---------------------------------------------------------------- joint moment


@dataclass(frozen=True)
class JointMomentTerms:
    """Pieces of ``V(x) = (C1(x) + beta1) e^{-kx} + (C2(x) + beta2) e^{kx} + V(x_R)``.

    Coordinates are the shifted ones (interval ``(0, L)``).
    """

    L: float
    r: float
    x_reset: float
    c: tuple
    D1: float
    D2: float
    beta1: float
    beta2: float
    V_reset: float

    def C1(self, x):
        return _joint_C1(self.L, self.r, self.x_reset, np.asarray(x, float), np, self.c, self.D1, self.D2)

    def C2(self, x):
        return _joint_C2(self.L, self.r, self.x_reset, np.asarray(x, float), np, self.c, self.D1, self.D2)


def _joint_C1(L, r, xr, x, xp, c, D1, D2):
    c1, c2, c3, k = c
    e = xp.exp
    inner = (
        e(x * k) * ((x / k - 1 / (2 * r)) * (D2 / D1 + 1 / r) + c3 / k)
        + (1 - e(L * k)) / (4 * D1) * x**2
        + c1 * x
        + e(2 * x * k) * ((e(-L * k) - 1) / (8 * D1) * (2 * x / k - 1 / (2 * r)) + c2 / (2 * k))
    )
    return inner / k


def _joint_C2(L, r, xr, x, xp, c, D1, D2):
    c1, c2, c3, k = c
    e = xp.exp
    inner = (
        e(-x * k) * ((x / k + 1 / (2 * r)) * (D2 / D1 + 1 / r) + c3 / k)
        + (1 - e(-L * k)) / (4 * D1) * x**2
        - c2 * x
        + e(-2 * x * k) * ((1 - e(L * k)) / (2 * D1) * (x / (2 * k) + 1 / (8 * r)) + c1 / (2 * k))
    )
    return inner / k


def _joint_pieces(L, r, xr, xp):
    c = _fea_c(L, r, xr, xp)
    k = c[3]
    e, sh = xp.exp, xp.sinh
    D1 = r * (sh(xr * k) + sh((L - xr) * k))
    D2 = sh(L * k)

    def C1(y):
        return _joint_C1(L, r, xr, y, xp, c, D1, D2)

    def C2(y):
        return _joint_C2(L, r, xr, y, xp, c, D1, D2)

    ratio = sh(xr * k) / sh(L * k)
    bracket = C2(L) - C1(0 * L) - C2(0 * L)
    v_r = (
        C1(xr) * e(-2 * xr * k)
        + C2(xr)
        - C1(L) * ratio * e(-(xr + L) * k)
        - ratio * e((L - xr) * k) * bracket
        - C1(0 * L)
        - C2(0 * L)
    ) / (1 - ratio * (e(L * k) - 1) * e(-xr * k))
    beta1 = -(v_r * (e(L * k) - 1) - C1(L) * e(-L * k) - bracket * e(L * k)) / (2 * sh(L * k))
    beta2 = -v_r - C1(0 * L) - C2(0 * L) - beta1
    return c, D1, D2, beta1, beta2, v_r, C1, C2


def _joint(L, x, r, xr, xp=np):
    c, D1, D2, beta1, beta2, v_r, C1, C2 = _joint_pieces(L, r, xr, xp)
    k = c[3]
    return (C1(x) + beta1) * xp.exp(-x * k) + (C2(x) + beta2) * xp.exp(x * k) + v_r


def joint_moment_terms(params: ResettingParams) -> JointMomentTerms:
    """Intermediate constants of the joint moment (``mu = 0``, ``r > 0``)."""
    _undrifted_only(params)
    p, _ = translate_to_origin(params, params.x_reset)
    if p.r < ZERO_TOL:
        raise DomainError("the joint-moment constants are defined for r > 0 only")
    _guard_k(p.b, p.r)
    c, D1, D2, beta1, beta2, v_r, _, _ = _joint_pieces(p.b, p.r, p.x_reset, np)
    return JointMomentTerms(
        L=p.b, r=p.r, x_reset=p.x_reset, c=tuple(float(v) for v in c),
        D1=float(D1), D2=float(D2), beta1=float(beta1), beta2=float(beta2), V_reset=float(v_r),
    )


def joint_moment_tau_area_undrifted(params: ResettingParams, x):
    """``E[tau(x) A(x)]`` for ``mu = 0``.

    ``r = 0`` is served as the limit ``r -> 0`` (Richardson in ``r``).
    """
    _undrifted_only(params)
    p, xs = translate_to_origin(params, x)
    xs = np.asarray(xs, dtype=float)
    if p.r < ZERO_TOL:
        out = _limit_r_to_zero(_joint, p.b, xs, p.x_reset)
    else:
        out = _area_eval(_joint, p, xs)
    return as_output(out, x)


def cov_tau_area_undrifted(params: ResettingParams, x):
    """``Cov[tau(x), A(x)]`` for ``mu = 0``."""
    v = joint_moment_tau_area_undrifted(params, x)
    return as_output(np.asarray(v) - np.asarray(fet_mean(params, x)) * np.asarray(fea_mean_undrifted(params, x)), x)


# ------------------------------------------------------ maximum and minimum


def _killed_left(z, x, mu, r):
    """Exit at 0 from (0, z) before any reset: ``e^{-mu x} sinh(b0 (z-x)) / sinh(b0 z)``."""
    b0 = math.sqrt(mu * mu + 2 * r)
    t1 = (-mu * x, b0 * (z - x))
    t2 = (0.0 * z, b0 * z)
    s = common_shift(t1, t2)
    return esinh(*t1, s) / esinh(*t2, s)


def _w_max(L, x, xr, mu, r, z):
    z = np.asarray(z, dtype=float)
    zz = np.where(z > x, z, np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        if r < ZERO_TOL:
            inside = _pi_left(zz, x, np.minimum(xr, zz / 2), mu, 0.0)
            out = inside
        else:
            # x_R inside (0, z): the exit-probability formula on (0, z);
            # otherwise every reset lands above z and kills the event.
            zin = np.where(zz > xr, zz, np.nan)
            inside = _pi_left_vec(zin, x, xr, mu, r)
            killed = _killed_left(zz, x, mu, r)
            out = np.where(zz > xr, inside, killed)
    return np.where(z > x, out, 0.0)


def _pi_left_vec(Lz, x, xr, mu, r):
    b0 = math.sqrt(mu * mu + 2 * r)
    t1 = (0.0 * Lz, (Lz - xr) * b0)
    t2 = (mu * (Lz - x), (xr - x) * b0 + 0.0 * Lz)
    t3 = (Lz * mu, xr * b0 + 0.0 * Lz)
    s = common_shift(t1, t2, t3)
    return (esinh(*t1, s) + esinh(*t2, s)) / (esinh(*t1, s) + esinh(*t3, s))


def max_exit_joint_cdf(params: ResettingParams, x, z):
    """``P[max of the path up to tau(x) <= z, exit at a]``; ``x`` scalar, ``z`` array-like."""
    p, xs = translate_to_origin(params, x)
    _open_check(xs, p.b)
    _, zs = translate_to_origin(params, z)
    out = _w_max(p.b, float(xs), p.x_reset, p.mu, p.r, zs)
    return as_output(out, z)


def max_conditional_cdf(params: ResettingParams, x, z):
    """Distribution function of the path maximum given exit at ``a``."""
    pi0 = exit_prob_left(params, x)
    if pi0 < _CONDITIONING_FLOOR:
        raise DegenerateConditioning(f"P[exit at a] = {pi0!r} is too small to condition on")
    return as_output(np.asarray(max_exit_joint_cdf(params, x, z)) / pi0, z)


def max_conditional_density_at_reset(params: ResettingParams, z, *, conditional=True):
    """Density in ``z`` of the path maximum for a start at ``x_R``.

    With ``conditional=False`` the derivative of the joint law
    ``P[max <= z, exit at a]`` is returned instead of the conditional density.
    """
    p, zs = translate_to_origin(params, z)
    zs = np.asarray(zs, dtype=float)
    L, x, mu, r = p.b, p.x_reset, p.mu, p.r
    if np.any(zs < x):
        raise DomainError("z must lie in [x_R, b]")
    b0 = math.sqrt(mu * mu + 2 * r)
    if b0 < ZERO_TOL:
        out = x / zs**2
    else:
        tA = (zs * mu, x * b0 + 0 * zs)
        tS = (0 * zs, (zs - x) * b0)
        s = common_shift(tA, tS)
        A = esinh(*tA, s)
        B = b0 * ecosh(*tS, s) - mu * esinh(*tS, s)
        out = A * B / (esinh(*tS, s) + A) ** 2
    if conditional:
        pi0 = float(_pi_left(L, x, x, mu, r))
        if pi0 < _CONDITIONING_FLOOR:
            raise DegenerateConditioning(f"P[exit at a] = {pi0!r} is too small to condition on")
        out = out / pi0
    return as_output(out, z)


def _killed_right(L, z, x, mu, r):
    """Exit at L from (z, L) before any reset: ``e^{mu (L-x)} sinh(b0 (x-z)) / sinh(b0 (L-z))``."""
    b0 = math.sqrt(mu * mu + 2 * r)
    t1 = (mu * (L - x) + 0 * z, b0 * (x - z))
    t2 = (0.0 * z, b0 * (L - z))
    s = common_shift(t1, t2)
    return esinh(*t1, s) / esinh(*t2, s)


def _w_min(L, x, xr, mu, r, z):
    z = np.asarray(z, dtype=float)
    zz = np.where(z < x, z, np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        if r < ZERO_TOL:
            out = 1.0 - _pi_left(L - zz, x - zz, np.maximum(xr - zz, (L - zz) / 2), mu, 0.0)
        else:
            b0 = math.sqrt(mu * mu + 2 * r)
            # exit at L from (z, L): right-exit formula on the shifted interval
            t1 = (0.0 * zz, (L - xr) * b0 + 0 * zz)
            t2 = (mu * (L - x) + 0 * zz, (xr - x) * b0 + 0 * zz)
            t3 = ((L - zz) * mu, (xr - zz) * b0)
            s = common_shift(t1, t2, t3)
            inside = (esinh(*t3, s) - esinh(*t2, s)) / (esinh(*t1, s) + esinh(*t3, s))
            killed = _killed_right(L, zz, x, mu, r)
            out = np.where(zz < xr, inside, killed)
    return np.where(z < x, out, 0.0)


def min_exit_joint_survival(params: ResettingParams, x, z):
    """``P[min of the path up to tau(x) > z, exit at b]`` for ``z`` in ``[a, x]``."""
    p, xs = translate_to_origin(params, x)
    _open_check(xs, p.b)
    zs = np.asarray(z, dtype=float) - params.a
    if np.any(zs < 0) or np.any(zs > xs):
        raise DomainError("z must lie in [a, x]")
    return as_output(_w_min(p.b, float(xs), p.x_reset, p.mu, p.r, zs), z)


def min_conditional_survival(params: ResettingParams, x, z):
    """Survival function of the path minimum given exit at ``b``."""
    pib = exit_prob_right(params, x)
    if pib < _CONDITIONING_FLOOR:
        raise DegenerateConditioning(f"P[exit at b] = {pib!r} is too small to condition on")
    return as_output(np.asarray(min_exit_joint_survival(params, x, z)) / pib, z)
