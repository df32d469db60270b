"""Inverse first-exit-time problem for undrifted Brownian motion with resetting.

The start ``eta`` is random with density ``g`` on ``(0, b)``.  The FET
transform is the ``g``-mixture of ``M(x, lam)``; written with
``alpha = sqrt(2(lam + r))`` it only involves ``E[exp(-alpha eta)]`` and
``E[exp(-alpha (b - eta))]``.  For densities symmetric about ``b/2`` the
relation can be solved for the transform of ``g``.

Densities expose ``lt(theta) = E[exp(-theta eta)]`` and
``lt_reflected(theta) = E[exp(-theta (b - eta))]`` for real or complex
``theta``; both are bounded for ``Re theta >= 0``, which keeps the forward
map free of overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

from . import analytic
from ._numdiff import derivative
from .core import ZERO_TOL, ResettingParams
from .errors import DomainError, NumericalError, SingularityUnresolved, VerificationFailed
from .laplace import TransformEvaluator

__all__ = [
    "InitialDensity",
    "UniformOn",
    "BetaDensity",
    "TruncatedExponential",
    "DiscreteUniform",
    "PointMass",
    "Linear2x",
    "Mixture",
    "CustomTransform",
    "IFETProblem",
    "MomentReport",
    "CompatibilityReport",
    "ExampleReport",
    "g_lt",
    "jk",
    "a_lambda",
    "s_lambda",
    "forward_fet_lt",
    "forward_transform",
    "recover_g_lt_symmetric",
    "beta_mixture_fet_lt",
    "beta_mixture_density",
    "moments_from_lt",
    "compatibility_check",
    "printed_example_lt",
    "example_setup",
    "verify_example",
]

_SMALL = 1e-6


def _arr(theta):
    t = np.asarray(theta)
    return t if np.iscomplexobj(t) else t.astype(float)


def _out(value, theta):
    v = np.asarray(value)
    if np.ndim(theta) == 0:
        v = v[()]
        return complex(v) if np.iscomplexobj(v) else float(v)
    return v


def _exprel(z):
    """``(exp(z) - 1) / z`` with the series near 0 (complex-safe)."""
    z = np.asarray(z)
    small = np.abs(z) < _SMALL
    safe = np.where(small, 1.0, z)
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.expm1(safe) / safe
    return np.where(small, 1.0 + z / 2 + z * z / 6, val)


# ------------------------------------------------------------------ densities


class InitialDensity:
    """Law of the random start on ``[0, b]``."""

    b: float = 1.0
    symmetric: bool = False

    def lt(self, theta):
        raise NotImplementedError

    def lt_reflected(self, theta):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError(f"{type(self).__name__} has no pointwise density")

    def sample_from_uniform(self, u):
        raise NotImplementedError(f"{type(self).__name__} cannot be sampled")

    def atoms(self):
        """``(points, weights)`` of a discrete law, else ``None``."""
        return None


@dataclass(frozen=True)
class UniformOn(InitialDensity):
    b: float = 1.0
    symmetric: bool = field(default=True, init=False)

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError("b must be positive")

    def lt(self, theta):
        t = _arr(theta)
        return _out(_exprel(-t * self.b), theta)

    lt_reflected = lt

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= self.b), 1.0 / self.b, 0.0)

    def sample_from_uniform(self, u):
        return self.b * np.asarray(u, dtype=float)


def _kummer_series(a, c, z, terms=600):
    """``1F1(a; c; z)`` by its power series (real or complex ``z``)."""
    z = np.asarray(z)
    total = np.ones_like(z, dtype=complex if np.iscomplexobj(z) else float)
    term = np.ones_like(total)
    for k in range(terms):
        term = term * z * (a + k) / ((c + k) * (k + 1))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            return total
    raise NumericalError("hypergeometric series did not converge")


@dataclass(frozen=True)
class BetaDensity(InitialDensity):
    """Beta(alpha, beta) on ``(0, 1)``."""

    alpha: float = 2.0
    beta: float = 2.0
    b: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError("Beta parameters must be positive")

    @property
    def symmetric(self):
        return self.alpha == self.beta

    def lt(self, theta):
        # E[e^{-t eta}] = e^{-t} 1F1(beta; alpha+beta; t): positive terms for t > 0
        t = _arr(theta)
        return _out(np.exp(-t) * _kummer_series(self.beta, self.alpha + self.beta, t), theta)

    def lt_reflected(self, theta):
        t = _arr(theta)
        return _out(np.exp(-t) * _kummer_series(self.alpha, self.alpha + self.beta, t), theta)

    def raw_moment(self, k):
        return math.exp(special.betaln(self.alpha + k, self.beta) - special.betaln(self.alpha, self.beta))

    def pdf(self, x):
        return stats.beta.pdf(x, self.alpha, self.beta)

    def sample_from_uniform(self, u):
        return stats.beta.ppf(np.asarray(u, dtype=float), self.alpha, self.beta)


@dataclass(frozen=True)
class TruncatedExponential(InitialDensity):
    """``gamma exp(-gamma x) / (1 - exp(-gamma b))`` on ``(0, b)``."""

    gamma: float = 1.0
    b: float = 1.0
    symmetric: bool = field(default=False, init=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")

    def _norm(self):
        return self.gamma / -math.expm1(-self.gamma * self.b)

    def lt(self, theta):
        t = _arr(theta)
        return _out(self._norm() * self.b * _exprel(-(t + self.gamma) * self.b), theta)

    def lt_reflected(self, theta):
        t = _arr(theta)
        return _out(self._norm() * self.b * np.exp(-t * self.b) * _exprel((t - self.gamma) * self.b), theta)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= self.b), self._norm() * np.exp(-self.gamma * x), 0.0)

    def sample_from_uniform(self, u):
        u = np.asarray(u, dtype=float)
        return -np.log1p(u * np.expm1(-self.gamma * self.b)) / self.gamma


@dataclass(frozen=True)
class DiscreteUniform(InitialDensity):
    """Atoms at ``points`` with ``weights`` (uniform when omitted)."""

    points: tuple
    b: float = 1.0
    weights: tuple | None = None

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if not pts:
            raise DomainError("at least one atom is required")
        w = tuple(float(v) for v in self.weights) if self.weights is not None else (1.0 / len(pts),) * len(pts)
        if len(w) != len(pts) or any(v < 0 for v in w) or abs(sum(w) - 1.0) > 1e-12:
            raise DomainError("weights must be non-negative, match the points and sum to 1")
        if any(p < 0 or p > self.b for p in pts):
            raise DomainError("atoms must lie in [0, b]")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def symmetric(self):
        pairs = sorted(zip(self.points, self.weights))
        mirror = sorted((self.b - p, w) for p, w in pairs)
        return all(abs(p - q) < 1e-12 and abs(w - v) < 1e-12 for (p, w), (q, v) in zip(pairs, mirror))

    def lt(self, theta):
        t = _arr(theta)
        return _out(sum(w * np.exp(-t * p) for p, w in zip(self.points, self.weights)), theta)

    def lt_reflected(self, theta):
        t = _arr(theta)
        return _out(sum(w * np.exp(-t * (self.b - p)) for p, w in zip(self.points, self.weights)), theta)

    def sample_from_uniform(self, u):
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, np.asarray(u, dtype=float), side="right")
        return np.asarray(self.points)[np.minimum(idx, len(self.points) - 1)]

    def atoms(self):
        return np.asarray(self.points), np.asarray(self.weights)


def PointMass(x: float, b: float = 1.0) -> DiscreteUniform:
    return DiscreteUniform((x,), b=b)


@dataclass(frozen=True)
class Linear2x(InitialDensity):
    """``g(x) = 2x`` on ``(0, 1)``."""

    b: float = field(default=1.0, init=False)
    symmetric: bool = field(default=False, init=False)

    def lt(self, theta):
        # 2/t^2 (1 - e^{-t}(1 + t)), series 1 - 2t/3 + t^2/4 near 0
        t = _arr(theta)
        small = np.abs(t) < 1e-3
        s = np.where(small, 1.0, t)
        with np.errstate(over="ignore", invalid="ignore"):
            val = 2.0 / s**2 * (-np.expm1(-s) - s * np.exp(-s))
        ser = 1 - 2 * t / 3 + t**2 / 4 - t**3 / 15
        return _out(np.where(small, ser, val), theta)

    def lt_reflected(self, theta):
        # E[e^{-t(1-eta)}] = 2/t^2 (t - 1 + e^{-t})
        t = _arr(theta)
        small = np.abs(t) < 1e-3
        s = np.where(small, 1.0, t)
        with np.errstate(over="ignore", invalid="ignore"):
            val = 2.0 / s**2 * (s + np.expm1(-s))
        ser = 1 - t / 3 + t**2 / 12 - t**3 / 60
        return _out(np.where(small, ser, val), theta)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= 1), 2 * x, 0.0)

    def sample_from_uniform(self, u):
        return np.sqrt(np.asarray(u, dtype=float))


@dataclass(frozen=True)
class Mixture(InitialDensity):
    components: tuple
    weights: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        w = tuple(float(v) for v in self.weights)
        if len(comps) != len(w) or not comps:
            raise DomainError("one weight per component is required")
        if any(v < 0 for v in w) or abs(sum(w) - 1.0) > 1e-12:
            raise DomainError("mixture weights must be non-negative and sum to 1")
        if len({c.b for c in comps}) != 1:
            raise DomainError("components must share the interval")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @property
    def b(self):
        return self.components[0].b

    @property
    def symmetric(self):
        return all(c.symmetric for c in self.components)

    def lt(self, theta):
        return _out(sum(w * np.asarray(c.lt(theta)) for c, w in zip(self.components, self.weights)), theta)

    def lt_reflected(self, theta):
        return _out(sum(w * np.asarray(c.lt_reflected(theta)) for c, w in zip(self.components, self.weights)),
                    theta)

    def pdf(self, x):
        return sum(w * np.asarray(c.pdf(x)) for c, w in zip(self.components, self.weights))

    def sample_from_uniform(self, u):
        # the uniform picks a component, its rescaled remainder drives that component
        u = np.asarray(u, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.weights)])
        cum[-1] = 1.0
        idx = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(self.weights) - 1)
        out = np.empty_like(u)
        for j, comp in enumerate(self.components):
            sel = idx == j
            if np.any(sel):
                v = (u[sel] - cum[j]) / (cum[j + 1] - cum[j])
                out[sel] = comp.sample_from_uniform(np.clip(v, 1e-300, 1 - 1e-16))
        return out


@dataclass(frozen=True)
class CustomTransform(InitialDensity):
    """A start law known only through its bilateral transform ``theta -> E[exp(-theta eta)]``."""

    transform: Callable
    b: float = 1.0
    symmetric: bool = False
    reflected: Callable | None = None

    def lt(self, theta):
        return self.transform(theta)

    def lt_reflected(self, theta):
        if self.reflected is not None:
            return self.reflected(theta)
        # E[e^{-t(b-eta)}] = e^{-tb} E[e^{t eta}]
        t = _arr(theta)
        return _out(np.exp(-t * self.b) * np.asarray(self.transform(-t)), theta)


def g_lt(density: InitialDensity, theta):
    """``E[exp(-theta eta)]``, the (bilateral) transform of the start law."""
    return density.lt(theta)


def jk(theta, k: int):
    """``J_k(theta) = int_0^1 exp(-theta x) x^k dx``.

    Forward recursion from ``J_0`` where it is stable (``|theta| > k + 1``);
    the power series ``sum (-theta)^n / (n! (n + k + 1))`` otherwise.
    """
    if k < 0 or int(k) != k:
        raise DomainError("k must be a non-negative integer")
    t = _arr(theta)
    use_series = (np.abs(t) <= k + 1) | ((np.real(t) < 0) & (np.imag(t) == 0))
    ts = np.where(use_series, t, 0)
    total = np.zeros_like(ts, dtype=complex if np.iscomplexobj(t) else float)
    term = np.ones_like(total)
    for n in range(400):
        if n:
            term = term * (-ts) / n
        inc = term / (n + k + 1)
        total = total + inc
        if np.all(np.abs(inc) <= 1e-17 * np.abs(total)):
            break
    tr = np.where(use_series, 1.0, t)
    with np.errstate(over="ignore", invalid="ignore"):
        e = np.exp(-tr)
        j = -np.expm1(-tr) / tr
        for i in range(1, k + 1):
            j = i / tr * j - e / tr
    return _out(np.where(use_series, total, j), theta)


def _beta_sym_lt_prop(k: int, theta):
    c = math.factorial(2 * k + 1) / math.factorial(k) ** 2
    return c * sum((-1) ** i * math.comb(k, i) * np.asarray(jk(theta, k + i)) for i in range(k + 1))


# --------------------------------------------------------------- forward map


def _require_undrifted(params: ResettingParams):
    if abs(params.mu) >= ZERO_TOL:
        raise DomainError("the inverse problem is formulated for mu = 0 only")
    if params.a != 0.0:
        raise DomainError("densities live on (0, b); shift the interval first")


def _alpha(params, lam):
    lam = _arr(lam)
    arg = 2.0 * (lam + params.r)
    if not np.iscomplexobj(arg) and np.any(arg < 0):
        arg = arg.astype(complex)
    return lam, np.sqrt(arg)


def s_lambda(params: ResettingParams, lam):
    """``sinh(alpha x_R) + sinh(alpha (b - x_R))``."""
    _, a = _alpha(params, lam)
    return _out(np.sinh(a * params.x_reset) + np.sinh(a * (params.b - params.x_reset)), lam)


def a_lambda(params: ResettingParams, lam):
    """``lam sinh(alpha b) + r s_lambda``."""
    lam_a, a = _alpha(params, lam)
    return _out(lam_a * np.sinh(a * params.b) + params.r * np.asarray(s_lambda(params, lam)), lam)


def _scaled_s(params, a):
    b, xr = params.b, params.x_reset
    # e^{-alpha b} s_lambda
    return 0.5 * (np.exp(-a * (b - xr)) - np.exp(-a * (b + xr)) + np.exp(-a * xr) - np.exp(-a * (2 * b - xr)))


def forward_fet_lt(density: InitialDensity, params: ResettingParams, lam):
    """``E[exp(-lam tau)]`` for the start law ``density``.

    Evaluated as
    ``[r s~ + lam/2 (1 - e^{-ab}) (g(a) + g_refl(a))] / [lam/2 (1 - e^{-2ab}) + r s~]``
    with ``a = sqrt(2(lam + r))`` and ``s~ = e^{-ab} s_lambda``, an exact
    rescaling of the unbounded form that never overflows.  Valid for
    ``lam > -r`` and complex ``lam``.
    """
    _require_undrifted(params)
    if abs(density.b - params.b) > 1e-12:
        raise DomainError(f"density lives on (0, {density.b}) but the interval is (0, {params.b})")
    lam_a, a = _alpha(params, lam)
    b, r = params.b, params.r
    st = _scaled_s(params, a)
    gsum = np.asarray(density.lt(a)) + np.asarray(density.lt_reflected(a))
    num = r * st + 0.5 * lam_a * (-np.expm1(-a * b)) * gsum
    den = 0.5 * lam_a * (-np.expm1(-2 * a * b)) + r * st
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / den
    # lam = 0 with r = 0 is 0/0; the transform equals 1 there
    out = np.where(np.abs(den) == 0, 1.0, out)
    lam_in = np.asarray(lam)
    if not np.iscomplexobj(lam_in) and np.iscomplexobj(out):
        out = np.real(out)
    return _out(out, lam)


def forward_transform(density: InitialDensity, params: ResettingParams) -> TransformEvaluator:
    """:func:`forward_fet_lt` as an evaluator valid on ``lam > -r``."""
    return TransformEvaluator(lambda lam: forward_fet_lt(density, params, lam), lam_min=-params.r,
                              complex_ok=True, name=f"forward[{type(density).__name__}]")


# ------------------------------------------------------------------ recovery


@dataclass(frozen=True)
class IFETProblem:
    """Target FET transform on a fixed geometry.

    ``target`` must be valid on ``lam > -r`` (the recovery evaluates it at
    ``theta^2 / 2 - r``).
    """

    params: ResettingParams
    target: Callable
    symmetry_assumed: bool = True

    def __post_init__(self):
        _require_undrifted(self.params)

    def check(self, lams=(0.1, 0.5, 1.0, 2.0, 5.0, 10.0)) -> None:
        vals = np.array([float(np.real(self.target(l))) for l in lams])
        if np.any(vals <= 0) or np.any(vals > 1 + 1e-12):
            raise DomainError("target transform must take values in (0, 1] for lam > 0")
        if abs(float(np.real(self.target(1e-9))) - 1.0) > 1e-6:
            raise DomainError("target transform must tend to 1 at lam = 0")


def _recover_raw(problem: IFETProblem, theta):
    p = problem.params
    b, r = p.b, p.r
    t = np.asarray(theta, dtype=float)
    lam = t * t / 2 - r
    st = _scaled_s(p, t)
    f = np.asarray(problem.target(lam), dtype=complex if np.iscomplexobj(problem.target(lam)) else float)
    # numerator and denominator of the symmetric recovery divided by e^{theta b}
    num = (0.5 * lam * (-np.expm1(-2 * t * b)) + r * st) * f - r * st
    den = lam * (-np.expm1(-t * b))
    return np.real(num / den)


def recover_g_lt_symmetric(problem: IFETProblem, theta, *, eps: float = 2e-3):
    """Transform of a symmetric start law reproducing ``problem.target``.

    The formula is 0/0 at ``theta = sqrt(2r)``; within ``eps * sqrt(2r)`` of
    it the value is obtained by polynomial extrapolation from both sides and
    :class:`SingularityUnresolved` is raised if the two one-sided values
    disagree by more than ``1e-6`` relative.
    """
    if not problem.symmetry_assumed:
        raise DomainError("recovery formula requires a density symmetric about b/2")
    ts = np.atleast_1d(np.asarray(theta, dtype=float))
    if np.any(ts <= 0):
        raise DomainError("theta must be positive")
    t0 = math.sqrt(2 * problem.params.r)
    out = _recover_raw(problem, ts)
    near = np.abs(ts - t0) < eps * max(t0, 1.0)
    for i in np.nonzero(near)[0]:
        out[i] = _fill_singularity(problem, ts[i], t0, eps * max(t0, 1.0))
    return float(out[0]) if np.ndim(theta) == 0 else out


def _fill_singularity(problem, t, t0, width):
    steps = np.array([1.0, 2.0, 3.0, 4.0]) * width
    right = t0 + steps
    left = t0 - steps
    vr = _recover_raw(problem, right)
    vl = _recover_raw(problem, left)
    pr = np.polyfit(right - t0, vr, 3)
    pl = np.polyfit(left - t0, vl, 3)
    d = t - t0
    er, el = np.polyval(pr, d), np.polyval(pl, d)
    if abs(er - el) > 1e-6 * max(abs(er), abs(el), 1e-300):
        raise SingularityUnresolved(
            f"one-sided extrapolations {el!r} and {er!r} at theta={t} disagree"
        )
    both = np.polyfit(np.concatenate([left, right]) - t0, np.concatenate([vl, vr]), 5)
    return float(np.polyval(both, d))


# -------------------------------------------------------------- beta mixtures


_PROP_PARAMS = dict(mu=0.0, r=1.0, x_reset=0.5, b=1.0)


def _check_weights(weights):
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0 or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
        raise DomainError("weights must be non-negative and sum to 1")
    return w


def beta_mixture_fet_lt(weights: Sequence[float], lam, ks: Sequence[int] | None = None):
    """``sum p_k fhat_k(lam)`` on ``b = 1, r = 1, x_R = 1/2``.

    ``fhat_k`` is the transform generated by the Beta(k+1, k+1) start, in
    the closed form ``[2 sinh(a/2) + lam (e^a - 1) g_k(a)] / [lam sinh a + 2 sinh(a/2)]``.
    ``ks`` defaults to ``1 .. N``.
    """
    w = _check_weights(weights)
    ks = list(range(1, w.size + 1)) if ks is None else list(ks)
    if len(ks) != w.size:
        raise DomainError("one k per weight is required")
    lam_a = _arr(lam)
    a = np.sqrt(2 * (lam_a + 1.0) + 0j) if np.any(np.real(lam_a) < -1) else np.sqrt(2 * (lam_a + 1.0))
    total = 0.0
    for p, k in zip(w, ks):
        gk = _beta_sym_lt_prop(k, a)
        with np.errstate(over="ignore", invalid="ignore"):
            fk = (2 * np.sinh(a / 2) + lam_a * np.expm1(a) * gk) / (lam_a * np.sinh(a) + 2 * np.sinh(a / 2))
        total = total + p * fk
    return _out(total, lam)


def beta_mixture_density(weights: Sequence[float], ks: Sequence[int] | None = None) -> Mixture:
    w = _check_weights(weights)
    ks = list(range(1, w.size + 1)) if ks is None else list(ks)
    return Mixture(tuple(BetaDensity(k + 1.0, k + 1.0) for k in ks), tuple(w))


# ------------------------------------------------------------------- moments


@dataclass(frozen=True)
class MomentReport:
    m1: float
    m2: float
    m3: float
    m4: float
    errors: tuple = ()

    @property
    def mu2(self):
        return self.m2 - self.m1**2

    @property
    def mu3(self):
        return self.m3 - 3 * self.m1 * self.m2 + 2 * self.m1**3

    @property
    def mu4(self):
        return self.m4 - 4 * self.m1 * self.m3 + 6 * self.m1**2 * self.m2 - 3 * self.m1**4

    @property
    def gamma1(self):
        return self.mu3 / self.mu2**1.5

    @property
    def gamma2(self):
        return self.mu4 / self.mu2**2 - 3.0

    def as_dict(self):
        return {k: getattr(self, k) for k in ("m1", "m2", "m3", "m4", "mu2", "mu3", "mu4", "gamma1", "gamma2")}


def moments_from_lt(evaluator: Callable, n: int = 4, *, h0: float | Sequence[float] = (0.1, 0.03, 0.01),
                    rtol: float = 1e-4) -> MomentReport:
    """Raw moments ``(-1)^k F^(k)(0)``, ``k <= n``, by Richardson-extrapolated differences.

    ``evaluator`` is called directly (bypassing any domain check) at
    ``|lam| <= 2 h0``, so the transform must be analytic there.  Each
    starting step in ``h0`` is tried and the converged estimate with the
    smallest error is kept: large steps limit rounding in the fourth
    difference, small ones cope with a nearby pole.
    """
    if not 1 <= n <= 4:
        raise DomainError("n must be in 1..4")
    fn = evaluator.fn if isinstance(evaluator, TransformEvaluator) else evaluator
    steps = (h0,) if np.isscalar(h0) else tuple(h0)

    def f(l):
        return np.asarray(fn(np.asarray(l, dtype=float)), dtype=float)

    vals, errs = [], []
    for k in range(1, 5):
        if k > n:
            vals.append(math.nan)
            continue
        best = None
        for h in steps:
            try:
                v, e = derivative(f, 0.0, k, h0=h, rtol=rtol)
            except NumericalError:
                continue
            if best is None or e < best[1]:
                best = (v, e)
        if best is None:
            raise NumericalError(f"moment {k} did not converge to relative accuracy {rtol}")
        vals.append((-1) ** k * best[0])
        errs.append(best[1])
    return MomentReport(*vals, errors=tuple(errs))


@dataclass(frozen=True)
class CompatibilityReport:
    feasible_hint: bool
    E_tau: float
    T_bar: float
    argmax: float


def compatibility_check(problem: IFETProblem, *, grid: int = 401, rtol: float = 1e-6) -> CompatibilityReport:
    """Necessary condition ``E[tau] <= max_x E[tau(x)]``.

    ``E[tau]`` comes from the target transform by differentiation; the
    maximum is taken on an ``x``-grid and polished with a bounded scalar
    search.  ``rtol`` absorbs the differentiation error at equality.
    """
    from scipy.optimize import minimize_scalar

    p = problem.params
    fn = problem.target.fn if isinstance(problem.target, TransformEvaluator) else problem.target
    d, _ = derivative(lambda l: np.asarray(fn(np.asarray(l, dtype=float)), dtype=float), 0.0, 1, h0=1e-3)
    e_tau = -d
    xs = np.linspace(0.0, p.b, grid)
    vals = np.asarray(analytic.fet_mean(p, xs))
    i = int(np.argmax(vals))
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    res = minimize_scalar(lambda x: -analytic.fet_mean(p, x), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    t_bar, arg = (-res.fun, res.x) if -res.fun >= vals[i] else (vals[i], xs[i])
    return CompatibilityReport(bool(e_tau <= t_bar * (1 + rtol)), float(e_tau), float(t_bar), float(arg))


# ------------------------------------------------------------ printed examples

EXAMPLE_GRID = np.logspace(-1, 1, 40)
EXAMPLE3_TERMS = 60


def _a1(lam):
    return np.sqrt(2 * (_arr(lam) + 1.0))


def _printed_ex1(lam):
    a = _a1(lam)
    return 2 * (a * np.sinh(a / 2) + lam * (np.cosh(a) - 1)) / (a * (lam * np.sinh(a) + 2 * np.sinh(a / 2)))


def _printed_ex2(lam):
    a = _a1(lam)
    g1 = _beta_sym_lt_prop(1, a)
    return (2 * np.sinh(a / 2) + lam * (np.exp(a) - 1) * g1) / (lam * np.sinh(a) + 2 * np.sinh(a / 2))


def _beta_ratio(al, be, k):
    return np.exp(special.betaln(al + k, be) - special.betaln(al, be))


def _printed_ex3(lam, al, be, *, corrected=False, terms=EXAMPLE3_TERMS):
    """Example-3 transform from the Beta moment series.

    ``corrected=False`` follows the printed indices (moment ``B(alpha+k)``
    and power ``alpha^k`` in the second sum); ``corrected=True`` uses the
    moments that the odd/even split of the moment generating function
    actually produces, ``B(alpha+2k+1)`` and ``B(alpha+2k)`` with ``alpha^{2k}``.
    """
    lam = np.asarray(lam, dtype=float)
    a = _a1(lam)
    s1 = np.zeros_like(a)
    s2 = np.zeros_like(a)
    tail = 0.0
    for k in range(terms):
        lg_odd = (2 * k + 1) * np.log(a) - special.gammaln(2 * k + 2)
        if corrected:
            s1 += np.exp(lg_odd) * _beta_ratio(al, be, 2 * k + 1)
            if k >= 1:
                s2 += np.exp(2 * k * np.log(a) - special.gammaln(2 * k + 1)) * _beta_ratio(al, be, 2 * k)
        else:
            s1 += np.exp(lg_odd) * _beta_ratio(al, be, k)
            if k >= 1:
                s2 += np.exp(k * np.log(a) - special.gammaln(2 * k + 1)) * _beta_ratio(al, be, k)
        tail = float(np.max(np.exp(lg_odd)))
    if tail > 1e-15:
        raise NumericalError(f"Example-3 series truncated at {terms} terms with last term {tail:.2e}")
    brace = s1 * (np.cosh(a) - 1) - s2 * np.sinh(a)
    return 1 - lam / (lam * np.sinh(a) + 2 * np.sinh(a / 2)) * brace


def _printed_ex4(lam, gamma, r, xr=0.5):
    lam = _arr(lam)
    a = np.sqrt(2 * (lam + r))
    s = np.sinh(xr * a) + np.sinh((1 - xr) * a)
    bracket = (np.exp(a) - 1) * (np.exp(gamma) - np.exp(-a)) / (gamma + a) + (1 - np.exp(-a)) * (
        np.exp(gamma) - np.exp(a)
    ) / (gamma - a)
    return (r * s + lam * gamma / (2 * (np.exp(gamma) - 1)) * bracket) / (lam * np.sinh(a) + r * s)


def _printed_ex6(lam):
    a = _a1(lam)
    return 2 * (np.sinh(a / 2) + lam / 3 * (np.sinh(a) + np.sinh(2 * a))) / (
        lam * np.sinh(2 * a) + 2 * np.sinh(a / 2)
    )


def printed_example_lt(example: int, **kw) -> Callable:
    """The displayed target transform of an example as a function of ``lam``."""
    if example in (1, 5):
        return _printed_ex1
    if example == 2:
        return _printed_ex2
    if example == 3:
        al, be = kw.get("alpha", 1.5), kw.get("beta", 2.5)
        corrected = kw.get("corrected", False)
        return lambda lam: _printed_ex3(lam, al, be, corrected=corrected)
    if example == 4:
        gamma, r = kw.get("gamma", 2.0), kw.get("r", 1.0)
        return lambda lam: _printed_ex4(lam, gamma, r)
    if example == 6:
        return _printed_ex6
    raise DomainError(f"unknown example {example}")


def example_setup(example: int, **kw):
    """``(params, density)`` stated for an example."""
    if example in (1, 5):
        return ResettingParams(0.0, 1.0, 0.5, b=1.0), UniformOn(1.0)
    if example == 2:
        return ResettingParams(0.0, 1.0, 0.5, b=1.0), BetaDensity(2.0, 2.0)
    if example == 3:
        return ResettingParams(0.0, 1.0, 0.5, b=1.0), BetaDensity(kw.get("alpha", 1.5), kw.get("beta", 2.5))
    if example == 4:
        return ResettingParams(0.0, kw.get("r", 1.0), 0.5, b=1.0), TruncatedExponential(kw.get("gamma", 2.0))
    if example == 6:
        return ResettingParams(0.0, 1.0, 0.5, b=2.0), DiscreteUniform((0.0, 1.0, 2.0), b=2.0)
    raise DomainError(f"unknown example {example}")


@dataclass
class ExampleReport:
    example: int
    passed: bool
    max_error: float
    tolerance: float
    worst_lambda: float
    details: dict = field(default_factory=dict)

    def as_dict(self):
        return {"example": self.example, "passed": self.passed, "max_error": self.max_error,
                "tolerance": self.tolerance, "worst_lambda": self.worst_lambda, "details": self.details}


def _compare(printed, forward, grid, mask=None):
    err = np.abs(np.asarray(printed(grid)) - np.asarray(forward(grid)))
    if mask is not None:
        err = np.where(mask, err, 0.0)
    i = int(np.argmax(err))
    return float(err[i]), float(grid[i])


def verify_example(example: int, *, raise_on_fail: bool = True, grid=None, **kw) -> ExampleReport:
    """Compare an example's displayed transform with the forward map of its stated start law.

    Tolerance ``1e-9`` on a 40-point ``lam`` grid in ``[0.1, 10]``
    (``1e-7`` for Example 3).  Example 4 is run for ``gamma`` in
    ``{0.5, 2, 5}`` and ``r`` in ``{1, 3}`` unless given; Example 5 also
    checks that the linear density gives the same transform as the uniform
    one while its own transform differs.
    """
    grid = EXAMPLE_GRID if grid is None else np.asarray(grid, dtype=float)
    tol = 1e-7 if example == 3 else 1e-9
    details: dict = {}
    if example in (1, 2, 6):
        params, dens = example_setup(example)
        err, lam_w = _compare(printed_example_lt(example), lambda l: forward_fet_lt(dens, params, l), grid)
    elif example == 3:
        cases = kw.get("cases", [(1.5, 2.5), (2.0, 2.0), (1.0, 1.0), (3.0, 0.7)])
        err, lam_w = 0.0, math.nan
        for al, be in cases:
            params, dens = example_setup(3, alpha=al, beta=be)
            e, l = _compare(printed_example_lt(3, alpha=al, beta=be, corrected=kw.get("corrected", False)),
                            lambda x: forward_fet_lt(dens, params, x), grid)
            ec, _ = _compare(printed_example_lt(3, alpha=al, beta=be, corrected=True),
                             lambda x: forward_fet_lt(dens, params, x), grid)
            details[f"alpha={al},beta={be}"] = {"error": e, "error_reindexed_series": ec}
            if e >= err:
                err, lam_w = e, l
    elif example == 4:
        err, lam_w = 0.0, math.nan
        for gamma in kw.get("gammas", (0.5, 2.0, 5.0)):
            for r in kw.get("rates", (1.0, 3.0)):
                params, dens = example_setup(4, gamma=gamma, r=r)
                a = np.sqrt(2 * (grid + r))
                mask = np.abs(a - gamma) > 1e-6
                e, l = _compare(printed_example_lt(4, gamma=gamma, r=r), lambda x: forward_fet_lt(dens, params, x),
                                grid, mask)
                details[f"gamma={gamma},r={r}"] = e
                if e >= err:
                    err, lam_w = e, l
    elif example == 5:
        params, uni = example_setup(5)
        lin = Linear2x()
        e_lin, l_lin = _compare(_printed_ex1, lambda l: forward_fet_lt(lin, params, l), grid)
        e_uni, _ = _compare(_printed_ex1, lambda l: forward_fet_lt(uni, params, l), grid)
        th = np.linspace(0.5, 5, 10)
        g_gap = float(np.max(np.abs(np.asarray(lin.lt(th)) - np.asarray(uni.lt(th)))))
        details.update({"linear_error": e_lin, "uniform_error": e_uni, "transform_gap": g_gap})
        err, lam_w = max(e_lin, e_uni), l_lin
        if g_gap < 1e-3:
            err = math.inf
    else:
        raise DomainError(f"unknown example {example}")
    report = ExampleReport(example, bool(err < tol), err, tol, lam_w, details)
    if raise_on_fail and not report.passed:
        raise VerificationFailed(f"example {example}: max error {err:.3e} at lambda={lam_w:.4g}", lam=lam_w,
                                 error=err)
    return report
