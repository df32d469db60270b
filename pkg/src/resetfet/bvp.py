"""Finite differences for nonlocal two-point boundary-value problems.

The generic problem on ``[a, b]`` is::

    1/2 sigma(x)^2 u'' + mu(x) u' + r (u(x_R) - u(x)) + c(x) u(x) = h(x)
    u(a) = left_bc,  u(b) = right_bc

Second-order central differences give a tridiagonal matrix; the value
``u(x_R)`` (linear interpolation between the two bracketing nodes) adds the
same two-entry row to every equation, i.e. a rank-one term.  The system is
solved with a banded LU plus the Sherman-Morrison formula, ``O(n)`` in time
and memory.

Besides the generic solver the module ships builders for the defining
problems of every closed form in :mod:`resetfet.analytic` and the
first-exit-area transform (numerically and, for ``mu = r = 0``, via Airy
functions).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from . import _airy
from .core import ResettingParams, translate_to_origin
from .errors import DomainError, GridTooCoarse, SingularSystem

__all__ = [
    "NonlocalBVPProblem",
    "GridSolution",
    "solve_nonlocal_bvp",
    "exit_prob_left_problem",
    "fet_moment_problem",
    "solve_fet_moments",
    "solve_fea_moments",
    "solve_joint_moment",
    "solve_max_law",
    "solve_min_law",
    "fea_lt_numeric",
    "fea_lt_airy",
    "airy",
]

Coefficient = Union[float, Callable[[np.ndarray], np.ndarray], np.ndarray]

PECLET_LIMIT = 0.5
MIN_NODES = 16
_RESIDUAL_RTOL = 1e-10


def _on_grid(coef: Coefficient, x: np.ndarray) -> np.ndarray:
    if coef is None:
        return np.zeros_like(x)
    if callable(coef):
        return np.broadcast_to(np.asarray(coef(x), dtype=float), x.shape).copy()
    arr = np.asarray(coef, dtype=float)
    if arr.ndim == 0:
        return np.full_like(x, float(arr))
    if arr.shape != x.shape:
        raise DomainError(f"grid coefficient has shape {arr.shape}, expected {x.shape}")
    return arr.copy()


@dataclass(frozen=True)
class NonlocalBVPProblem:
    """Coefficients, coupling point, data and grid of a nonlocal BVP.

    ``sigma``, ``mu_fn``, ``c`` and ``rhs`` may be constants, vectorised
    callables of position, or arrays of node values (length ``n + 1``).
    ``x_reset=None`` drops the coupling term while keeping the ``-r u``
    killing term; this is the law of an event that fails at the first reset.
    """

    a: float
    b: float
    r: float
    x_reset: float | None
    rhs: Coefficient = 0.0
    left_bc: float = 0.0
    right_bc: float = 0.0
    sigma: Coefficient = 1.0
    mu_fn: Coefficient = 0.0
    c: Coefficient = None
    n: int = 2000

    def __post_init__(self):
        if not self.a < self.b:
            raise DomainError(f"interval requires a < b, got ({self.a}, {self.b})")
        if self.n < MIN_NODES:
            raise DomainError(f"grid needs at least {MIN_NODES} cells, got n={self.n}")
        if self.r < 0:
            raise DomainError("reset rate must be non-negative")
        if self.x_reset is not None and not self.a < self.x_reset < self.b:
            raise DomainError(f"x_reset={self.x_reset} must lie inside ({self.a}, {self.b})")

    def nodes(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n + 1)

    def refined(self, factor: int = 2) -> "NonlocalBVPProblem":
        """Same problem on a grid ``factor`` times finer (array data resampled linearly)."""
        fine = np.linspace(self.a, self.b, self.n * factor + 1)
        coarse = self.nodes()

        def resample(coef):
            if coef is None or callable(coef) or np.ndim(coef) == 0:
                return coef
            return np.interp(fine, coarse, np.asarray(coef, dtype=float))

        return NonlocalBVPProblem(
            a=self.a, b=self.b, r=self.r, x_reset=self.x_reset, rhs=resample(self.rhs),
            left_bc=self.left_bc, right_bc=self.right_bc, sigma=resample(self.sigma),
            mu_fn=resample(self.mu_fn), c=resample(self.c), n=self.n * factor,
        )


@dataclass(frozen=True)
class GridSolution:
    nodes: np.ndarray
    values: np.ndarray
    h: float
    reset_value: float | None

    def __call__(self, x):
        """Cubic-spline interpolant of the node values."""
        out = CubicSpline(self.nodes, self.values)(np.asarray(x, dtype=float))
        return float(out) if np.ndim(x) == 0 else out


def _coupling(problem: NonlocalBVPProblem, h: float):
    if problem.x_reset is None or problem.r == 0:
        return None
    s = (problem.x_reset - problem.a) / h
    j = min(int(np.floor(s)), problem.n - 1)
    w = s - j
    return j, w


def _assemble(problem: NonlocalBVPProblem):
    x = problem.nodes()
    n = problem.n
    h = (problem.b - problem.a) / n
    sig2 = _on_grid(problem.sigma, x) ** 2
    if np.any(sig2 <= 0):
        raise DomainError("sigma must be strictly positive on the grid")
    mu = _on_grid(problem.mu_fn, x)
    peclet = np.max(np.abs(mu) * h / sig2)
    if peclet > PECLET_LIMIT:
        raise GridTooCoarse(f"grid Peclet number {peclet:.3g} exceeds {PECLET_LIMIT}; increase n")
    c = _on_grid(problem.c, x)
    f = _on_grid(problem.rhs, x)
    i = slice(1, n)
    lower = 0.5 * sig2[i] / h**2 - mu[i] / (2 * h)
    upper = 0.5 * sig2[i] / h**2 + mu[i] / (2 * h)
    diag = -sig2[i] / h**2 - problem.r + c[i]
    rhs = f[i].copy()
    rhs[0] -= lower[0] * problem.left_bc
    rhs[-1] -= upper[-1] * problem.right_bc
    return x, h, lower, diag, upper, rhs, f


def _residual(lower, diag, upper, rhs, u_int, r, cvec, u_reset):
    res = diag * u_int - rhs
    res[1:] += lower[1:] * u_int[:-1]
    res[:-1] += upper[:-1] * u_int[1:]
    if cvec is not None:
        res += r * u_reset
    return res


def solve_nonlocal_bvp(problem: NonlocalBVPProblem, *, richardson_tol: float | None = None) -> GridSolution:
    """Solve ``problem`` on its grid.

    With ``richardson_tol`` the problem is also solved on the doubled grid and
    :class:`GridTooCoarse` is raised when the two solutions differ by more
    than the tolerance at the shared nodes.
    """
    sol = _solve(problem)
    if richardson_tol is not None:
        fine = _solve(problem.refined(2))
        diff = np.max(np.abs(fine.values[::2] - sol.values))
        if diff > richardson_tol:
            raise GridTooCoarse(f"solutions at n={problem.n} and n={2 * problem.n} differ by {diff:.3e}")
    return sol


def _solve(problem: NonlocalBVPProblem) -> GridSolution:
    x, h, lower, diag, upper, rhs, f = _assemble(problem)
    n, m = problem.n, problem.n - 1
    ab = np.zeros((3, m))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    coupling = _coupling(problem, h)
    # boundary nodes entering u(x_R) belong to the data, not the unknowns
    bc_part, vec = 0.0, None
    if coupling is not None:
        j, w = coupling
        vec = np.zeros(m)
        for node, weight in ((j, 1.0 - w), (j + 1, w)):
            if node == 0:
                bc_part += weight * problem.left_bc
            elif node == n:
                bc_part += weight * problem.right_bc
            else:
                vec[node - 1] += weight
        rhs = rhs - problem.r * bc_part
    try:
        if vec is None:
            u_int = solve_banded((1, 1), ab, rhs, check_finite=True)
            u_reset = None
        else:
            both = solve_banded((1, 1), ab, np.column_stack([rhs, np.full(m, problem.r)]), check_finite=True)
            y, z = both[:, 0], both[:, 1]
            denom = 1.0 + vec @ z
            if abs(denom) < 1e-13 * (1.0 + abs(vec @ z)):
                raise SingularSystem("nonlocal coupling makes the discrete system singular")
            u_int = y - z * (vec @ y) / denom
            u_reset = float(vec @ u_int + bc_part)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"finite-difference matrix is singular: {exc}") from exc
    res = _residual(lower, diag, upper, rhs + (problem.r * bc_part if vec is not None else 0.0), u_int,
                    problem.r, vec, u_reset if u_reset is not None else 0.0)
    scale = max(np.max(np.abs(f)), abs(problem.left_bc), abs(problem.right_bc), 1.0)
    scale *= max(np.max(np.abs(diag)), 1.0)
    if np.max(np.abs(res)) > _RESIDUAL_RTOL * scale:
        raise SingularSystem(f"discrete residual {np.max(np.abs(res)):.3e} too large; system ill-conditioned")
    values = np.concatenate([[problem.left_bc], u_int, [problem.right_bc]])
    if u_reset is None and problem.x_reset is not None:
        u_reset = float(np.interp(problem.x_reset, x, values))
    return GridSolution(nodes=x, values=values, h=h, reset_value=u_reset)


# --------------------------------------------------------- defining problems


def _base(params: ResettingParams, n: int, **kw) -> NonlocalBVPProblem:
    p, _ = translate_to_origin(params, params.x_reset)
    return NonlocalBVPProblem(a=0.0, b=p.b, r=p.r, x_reset=p.x_reset, mu_fn=p.mu, n=n, **kw)


def exit_prob_left_problem(params: ResettingParams, n: int = 2000) -> NonlocalBVPProblem:
    """``u(0) = 1, u(b) = 0``, homogeneous equation (shifted coordinates)."""
    return _base(params, n, rhs=0.0, left_bc=1.0, right_bc=0.0)


def fet_moment_problem(params: ResettingParams, previous: np.ndarray | float, order: int, n: int = 2000):
    """``L T_k = -k T_{k-1}`` with zero boundary values; ``previous`` on the grid."""
    return _base(params, n, rhs=-order * np.asarray(previous, dtype=float))


def solve_fet_moments(params: ResettingParams, n: int = 2000, orders: int = 2):
    """Grid solutions of the chained problems for ``E[tau]``, ``E[tau^2]``, ..."""
    out, prev = [], 1.0
    for k in range(1, orders + 1):
        sol = solve_nonlocal_bvp(fet_moment_problem(params, prev, k, n))
        out.append(sol)
        prev = sol.values
    return out


def solve_fea_moments(params: ResettingParams, n: int = 2000):
    """``E[A]`` and ``E[A^2]``: ``L S_k = -k x S_{k-1}``, zero boundary values."""
    p, _ = translate_to_origin(params, params.x_reset)
    x = np.linspace(0.0, p.b, n + 1)
    s1 = solve_nonlocal_bvp(_base(params, n, rhs=-x))
    s2 = solve_nonlocal_bvp(_base(params, n, rhs=-2.0 * x * s1.values))
    return s1, s2


def solve_joint_moment(params: ResettingParams, n: int = 2000) -> GridSolution:
    """``E[tau A]``: ``L V = -x E[tau] - E[A]``, zero boundary values."""
    p, _ = translate_to_origin(params, params.x_reset)
    x = np.linspace(0.0, p.b, n + 1)
    t1 = solve_fet_moments(params, n, orders=1)[0]
    s1, _ = solve_fea_moments(params, n)
    return solve_nonlocal_bvp(_base(params, n, rhs=-x * t1.values - s1.values))


def solve_max_law(params: ResettingParams, z: float, n: int = 2000) -> GridSolution:
    """``P[max <= z, exit at a]`` as a function of the start, on ``(0, z)`` (shifted).

    When the reset point lies at or above ``z`` a reset ends the event, so the
    coupling is replaced by pure killing at rate ``r``.
    """
    p, zs = translate_to_origin(params, z)
    xr = p.x_reset if p.x_reset < zs else None
    return solve_nonlocal_bvp(NonlocalBVPProblem(a=0.0, b=zs, r=p.r, x_reset=xr, mu_fn=p.mu, n=n,
                                                 left_bc=1.0, right_bc=0.0))


def solve_min_law(params: ResettingParams, z: float, n: int = 2000) -> GridSolution:
    """``P[min > z, exit at b]`` as a function of the start, on ``(z, b)`` (shifted)."""
    p, zs = translate_to_origin(params, z)
    xr = p.x_reset if p.x_reset > zs else None
    return solve_nonlocal_bvp(NonlocalBVPProblem(a=zs, b=p.b, r=p.r, x_reset=xr, mu_fn=p.mu, n=n,
                                                 left_bc=0.0, right_bc=1.0))


# ------------------------------------------------ first-exit-area transform


def _fea_lt_problem(params: ResettingParams, lam: float, n: int) -> NonlocalBVPProblem:
    # The area integrates the actual position, so the grid stays on (a, b).
    return NonlocalBVPProblem(a=params.a, b=params.b, r=params.r, x_reset=params.x_reset, mu_fn=params.mu,
                              c=lambda y: -lam * y, left_bc=1.0, right_bc=1.0, n=n)


def fea_lt_numeric(params: ResettingParams, x, lam: float, n: int = 2000):
    """``E[exp(-lam A(x))]`` from the nonlocal BVP with ``c(x) = -lam x``.

    One Richardson step between ``n`` and ``2n`` removes the ``h^2`` term.
    """
    if lam < 0 or not np.isfinite(lam):
        raise DomainError("lambda must be non-negative")
    xs = np.asarray(x, dtype=float)
    if np.any(xs < params.a) or np.any(xs > params.b):
        raise DomainError("x outside [a, b]")
    if lam == 0:
        return 1.0 if np.ndim(x) == 0 else np.ones_like(xs)
    coarse = solve_nonlocal_bvp(_fea_lt_problem(params, lam, n))
    fine = solve_nonlocal_bvp(_fea_lt_problem(params, lam, 2 * n))
    extrap = GridSolution(coarse.nodes, (4.0 * fine.values[::2] - coarse.values) / 3.0, coarse.h, None)
    return extrap(x)


def airy(z):
    """``(Ai, Ai', Bi, Bi')`` at real ``z``."""
    return _airy.airy(z)


def fea_lt_airy(b: float, x, lam: float):
    """``E[exp(-lam A(x))]`` for ``mu = r = 0`` on ``(0, b)``.

    ``u'' = 2 lam x u`` with ``u(0) = u(b) = 1`` is solved by
    ``alpha1 Ai(k x) + alpha2 Bi(k x)``, ``k = (2 lam)^(1/3)``.
    """
    if not b > 0:
        raise DomainError("b must be positive")
    if lam <= 0:
        raise DomainError("lambda must be positive")
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0) or np.any(xs > b):
        raise DomainError("x outside [0, b]")
    _airy.check_switchover()
    k = (2.0 * lam) ** (1.0 / 3.0)
    ai0, _, bi0, _ = _airy.airy(0.0)
    aib, _, bib, _ = _airy.airy(k * b)
    alpha1 = (bi0 - bib) / (bi0 * aib - bib * ai0)
    alpha2 = (1.0 - alpha1 * ai0) / bi0
    ai, _, bi, _ = _airy.airy(k * xs)
    out = alpha1 * np.asarray(ai) + alpha2 * np.asarray(bi)
    return float(out) if np.ndim(x) == 0 else out
