"""Parameter records and small shared helpers.

Everything here assumes unit diffusion coefficient: between resets the path
is ``X(t) = x + mu*t + W(t)``.  Intervals are stored as a general ``(a, b)``
and shifted to ``(0, b - a)`` before any closed form is evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

__all__ = [
    "ResettingParams",
    "SpectralHelpers",
    "validate",
    "translate_to_origin",
    "spectral_helpers",
    "ZERO_TOL",
]

# |r| or |mu| below this value is treated as exactly zero.
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class ResettingParams:
    """Drifted Brownian motion with Poissonian resetting on ``(a, b)``.

    Attributes
    ----------
    mu : float
        Constant drift.
    r : float
        Reset rate (``r >= 0``).
    x_reset : float
        Position the process jumps to at each reset, inside ``(a, b)``.
    a, b : float
        Interval end points, ``a < b``.
    """

    mu: float
    r: float
    x_reset: float
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        for name in ("mu", "r", "x_reset", "a", "b"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise DomainError(f"{name} must be a real number, got {value!r}") from None
            object.__setattr__(self, name, value)
        validate(self)

    @property
    def length(self) -> float:
        return self.b - self.a

    def with_(self, **changes) -> "ResettingParams":
        return replace(self, **changes)


def validate(params: ResettingParams) -> ResettingParams:
    """Check the invariants of ``params`` and return it unchanged."""
    for name in ("mu", "r", "x_reset", "a", "b"):
        if not math.isfinite(getattr(params, name)):
            raise DomainError(f"{name} must be finite, got {getattr(params, name)}")
    if not params.a < params.b:
        raise DomainError(f"interval requires a < b, got a={params.a}, b={params.b}")
    if not params.a < params.x_reset < params.b:
        raise DomainError(
            f"x_reset={params.x_reset} must lie inside the open interval ({params.a}, {params.b})"
        )
    if params.r < 0:
        raise DomainError(f"reset rate must be non-negative, got r={params.r}")
    return params


def translate_to_origin(params: ResettingParams, x):
    """Shift ``(a, b)`` to ``(0, b - a)``.

    Returns ``(shifted_params, x - a)``.  ``x`` may be an array; every entry
    must lie in the closed interval ``[a, b]``.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs < params.a) or np.any(xs > params.b) or np.any(~np.isfinite(xs)):
        raise DomainError(f"position outside [{params.a}, {params.b}]: {x!r}")
    if params.a == 0.0:
        return params, xs if np.ndim(x) else float(xs)
    shifted = ResettingParams(
        mu=params.mu,
        r=params.r,
        x_reset=params.x_reset - params.a,
        a=0.0,
        b=params.b - params.a,
    )
    out = xs - params.a
    return shifted, out if np.ndim(x) else float(out)


@dataclass(frozen=True)
class SpectralHelpers:
    """``alpha = sqrt(2(lam + r))``, ``beta = sqrt(mu^2 + 2(lam + r))``, ``beta0 = beta`` at ``lam = 0``."""

    alpha_lambda: complex | float
    beta_lambda: complex | float
    beta0: float


def spectral_helpers(params: ResettingParams, lam) -> SpectralHelpers:
    lam_arr = np.asarray(lam)
    if np.iscomplexobj(lam_arr):
        alpha = np.sqrt(2.0 * (lam_arr + params.r))
        beta = np.sqrt(params.mu**2 + 2.0 * (lam_arr + params.r))
    else:
        alpha = np.sqrt(2.0 * (lam_arr.astype(float) + params.r))
        beta = np.sqrt(params.mu**2 + 2.0 * (lam_arr.astype(float) + params.r))
    beta0 = math.sqrt(params.mu**2 + 2.0 * params.r)
    if np.ndim(lam) == 0:
        alpha, beta = alpha[()], beta[()]
    return SpectralHelpers(alpha_lambda=alpha, beta_lambda=beta, beta0=beta0)
