"""Monte Carlo first-exit sampler for drifted Brownian motion with resetting.

Each path is an Euler walk (exact for constant drift) of step ``dt``.  Reset
epochs are drawn from ``Exp(r)`` and hit exactly by shortening the step that
contains them.  With the bridge correction every surviving step is also
tested for an unobserved excursion past each boundary, which happens with
probability ``exp(-2 d1 d2 / h)`` where ``d1, d2`` are the distances of the
step end points to that boundary.

Random numbers come from a Philox counter generator keyed by the seed and
indexed by the path number, so results do not depend on the thread count.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from . import analytic
from ._rng import DOMAIN_RESET, DOMAIN_STEP, start_uniforms, uniform_block
from .core import ResettingParams, translate_to_origin
from .errors import DomainError, HorizonExceeded

__all__ = [
    "SimConfig",
    "FirstExitSample",
    "Estimate",
    "EstimateSet",
    "sample_first_exit",
    "simulate_paths",
    "estimate_statistics",
    "estimate_with_random_start",
    "set_threads",
]

LEFT, RIGHT, HORIZON = 0, 1, -1


@dataclass(frozen=True)
class SimConfig:
    """Simulation controls.

    ``dt=None`` means ``1e-4 * (b - a)^2``; ``t_cap=None`` means
    ``t_cap_factor`` times the largest analytic mean exit time.  With
    ``strict_horizon`` any path reaching ``t_cap`` raises
    :class:`HorizonExceeded`; otherwise the count is kept in the result.
    """

    dt: float | None = None
    n_paths: int = 100_000
    seed: int = 0
    bridge_correction: bool = True
    t_cap: float | None = None
    t_cap_factor: float = 1e4
    strict_horizon: bool = True

    def __post_init__(self):
        if self.dt is not None and not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError("dt must be positive")
        if self.n_paths < 1:
            raise DomainError("n_paths must be at least 1")
        if self.t_cap is not None and not (self.t_cap > 0 and math.isfinite(self.t_cap)):
            raise DomainError("t_cap must be positive and finite")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must fit in 64 bits")


@dataclass(frozen=True)
class FirstExitSample:
    tau: float
    area: float
    side: str
    max: float
    min: float
    resets: int


@nb.njit(cache=True)
def _one_path(x0, mu, r, xr, b, dt, t_cap, bridge, seed, path):
    if x0 <= 0.0:
        return 0.0, 0.0, LEFT, x0, x0, 0
    if x0 >= b:
        return 0.0, 0.0, RIGHT, x0, x0, 0
    t = 0.0
    x = x0
    area = 0.0
    hi = x0
    lo = x0
    nres = 0
    step = 0
    z_next = 0.0
    u3 = 0.5
    if r > 0.0:
        next_reset = -math.log(uniform_block(seed, path, DOMAIN_RESET, 0)[0]) / r
    else:
        next_reset = math.inf
    while True:
        h = dt
        reset_now = False
        if next_reset - t <= dt:
            h = next_reset - t
            reset_now = True
        # one Philox block feeds two steps: both Box-Muller normals and one
        # bridge uniform per step
        if step % 2 == 0:
            u0, u1, u2, u3 = uniform_block(seed, path, DOMAIN_STEP, step // 2)
            rad = math.sqrt(-2.0 * math.log(u0))
            z = rad * math.cos(2.0 * math.pi * u1)
            z_next = rad * math.sin(2.0 * math.pi * u1)
            ub = u2
        else:
            z = z_next
            ub = u3
        step += 1
        xn = x + mu * h + math.sqrt(h) * z
        if xn <= 0.0 or xn >= b:
            c = 0.0 if xn <= 0.0 else b
            frac = (x - c) / (x - xn)
            area += 0.5 * (x + c) * frac * h
            t += frac * h
            if c == 0.0:
                return t, area, LEFT, hi, 0.0, nres
            return t, area, RIGHT, b, lo, nres
        if bridge and h > 0.0:
            # ub < p0 and ub > 1 - pb have exactly the per-boundary probabilities
            if ub < math.exp(-2.0 * x * xn / h):
                return t + 0.5 * h, area + 0.25 * x * h, LEFT, hi, 0.0, nres
            if 1.0 - ub < math.exp(-2.0 * (b - x) * (b - xn) / h):
                return t + 0.5 * h, area + 0.25 * (x + b) * h, RIGHT, b, lo, nres
        area += 0.5 * (x + xn) * h
        t += h
        x = xn
        if x > hi:
            hi = x
        if x < lo:
            lo = x
        if reset_now:
            x = xr
            if x > hi:
                hi = x
            if x < lo:
                lo = x
            nres += 1
            next_reset = t - math.log(uniform_block(seed, path, DOMAIN_RESET, nres)[0]) / r
        if t >= t_cap:
            return t, area, HORIZON, hi, lo, nres


@nb.njit(cache=True, parallel=True)
def _run(starts, paths, mu, r, xr, b, dt, t_cap, bridge, seed):
    n = starts.size
    tau = np.empty(n)
    area = np.empty(n)
    side = np.empty(n, dtype=np.int8)
    hi = np.empty(n)
    lo = np.empty(n)
    res = np.empty(n, dtype=np.int64)
    for i in nb.prange(n):
        a, bb, c, d, e, f = _one_path(starts[i], mu, r, xr, b, dt, t_cap, bridge, seed, paths[i])
        tau[i] = a
        area[i] = bb
        side[i] = c
        hi[i] = d
        lo[i] = e
        res[i] = f
    return tau, area, side, hi, lo, res


def set_threads(threads: int | None = None) -> int:
    """Bound numba's worker count; ``None`` reads ``RESET_FET_THREADS``."""
    if threads is None:
        env = os.environ.get("RESET_FET_THREADS")
        if not env:
            return nb.get_num_threads()
        threads = int(env)
    threads = max(1, min(int(threads), nb.config.NUMBA_NUM_THREADS))
    nb.set_num_threads(threads)
    return threads


def _resolve(params: ResettingParams, config: SimConfig, ref_mean: float):
    p, _ = translate_to_origin(params, params.x_reset)
    dt = config.dt if config.dt is not None else 1e-4 * p.b**2
    if config.t_cap is not None:
        t_cap = config.t_cap
    else:
        grid = np.linspace(0.0, p.b, 201)
        scale = max(ref_mean, float(np.max(analytic.fet_mean(p, grid))), dt)
        t_cap = config.t_cap_factor * scale
    return p, dt, t_cap


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_err: float
    n: int

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.std_err


def _est(values) -> Estimate:
    v = np.asarray(values, dtype=float)
    n = v.size
    if n == 0:
        return Estimate(math.nan, math.nan, 0)
    se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return Estimate(float(v.mean()), se, n)


@dataclass(frozen=True)
class EstimateSet:
    """Aggregated samples of ``(tau, A, side, max, min, resets)``.

    Statistics are exposed as :class:`Estimate` properties; the raw arrays
    are kept for derived quantities (empirical laws, transforms).  Paths
    that hit the horizon are excluded from every statistic and counted in
    ``horizon_count``.
    """

    tau: np.ndarray
    area: np.ndarray
    side: np.ndarray
    max: np.ndarray
    min: np.ndarray
    resets: np.ndarray
    horizon_count: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.tau.size)

    @property
    def pi_left(self) -> Estimate:
        return _est(self.side == LEFT)

    @property
    def pi_right(self) -> Estimate:
        return _est(self.side == RIGHT)

    @property
    def tau_mean(self) -> Estimate:
        return _est(self.tau)

    @property
    def tau_second(self) -> Estimate:
        return _est(self.tau**2)

    @property
    def area_mean(self) -> Estimate:
        return _est(self.area)

    @property
    def area_second(self) -> Estimate:
        return _est(self.area**2)

    @property
    def tau_area(self) -> Estimate:
        return _est(self.tau * self.area)

    @property
    def reset_mean(self) -> Estimate:
        return _est(self.resets)

    @property
    def cov_tau_area(self) -> Estimate:
        """Sample covariance; its standard error is that of the centred product."""
        prod = (self.tau - self.tau.mean()) * (self.area - self.area.mean())
        e = _est(prod)
        n = self.n
        return Estimate(e.mean * n / (n - 1), e.std_err, n)

    def moment(self, k: int) -> Estimate:
        return _est(self.tau**k)

    def laplace(self, lam: float) -> Estimate:
        return _est(np.exp(-lam * self.tau))

    def tau_cdf(self, t) -> tuple:
        """Empirical ``P[tau <= t]`` and its binomial standard error."""
        ts = np.sort(self.tau)
        F = np.searchsorted(ts, np.asarray(t, dtype=float), side="right") / self.n
        return F, np.sqrt(F * (1 - F) / self.n)

    def max_joint_cdf_left(self, z) -> tuple:
        """Empirical ``P[max <= z, exit left]`` with standard error."""
        z = np.asarray(z, dtype=float)
        ind = (self.side == LEFT)[:, None] & (self.max[:, None] <= np.atleast_1d(z)[None, :])
        p = ind.mean(axis=0)
        return p.reshape(z.shape), np.sqrt(p * (1 - p) / self.n).reshape(z.shape)

    def max_cdf_given_left(self, z) -> tuple:
        sub = self.max[self.side == LEFT]
        return _ecdf(sub, z)

    def max_mean_given_left(self) -> Estimate:
        return _est(self.max[self.side == LEFT])

    def min_mean_given_right(self) -> Estimate:
        return _est(self.min[self.side == RIGHT])

    def min_joint_survival_right(self, z) -> tuple:
        z = np.asarray(z, dtype=float)
        ind = (self.side == RIGHT)[:, None] & (self.min[:, None] > np.atleast_1d(z)[None, :])
        p = ind.mean(axis=0)
        return p.reshape(z.shape), np.sqrt(p * (1 - p) / self.n).reshape(z.shape)

    def min_survival_given_right(self, z) -> tuple:
        sub = self.min[self.side == RIGHT]
        F, se = _ecdf(sub, z)
        return 1.0 - F, se

    def summary(self) -> dict:
        out = {}
        for name in ("pi_left", "pi_right", "tau_mean", "tau_second", "area_mean", "area_second",
                     "tau_area", "cov_tau_area", "reset_mean"):
            e = getattr(self, name)
            out[name] = {"mean": e.mean, "std_err": e.std_err, "n": e.n}
        out["horizon_count"] = self.horizon_count
        return out


def _ecdf(sample, z):
    z = np.asarray(z, dtype=float)
    n = sample.size
    if n == 0:
        nan = np.full(z.shape, np.nan)
        return nan, nan
    s = np.sort(sample)
    F = np.searchsorted(s, z, side="right") / n
    return F, np.sqrt(F * (1 - F) / n)


def _simulate(params: ResettingParams, starts: np.ndarray, paths: np.ndarray, config: SimConfig, ref_mean):
    p, dt, t_cap = _resolve(params, config, ref_mean)
    tau, area, side, hi, lo, res = _run(starts, paths, p.mu, p.r, p.x_reset, p.b, dt, t_cap,
                                        config.bridge_correction, np.uint64(config.seed))
    # back to the original coordinates: the area integrates the actual position
    if params.a != 0.0:
        area = area + params.a * tau
        hi = hi + params.a
        lo = lo + params.a
    return tau, area, side, hi, lo, res, dt, t_cap


def _collect(raw, config, extra):
    tau, area, side, hi, lo, res, dt, t_cap = raw
    over = side == HORIZON
    count = int(over.sum())
    if count and config.strict_horizon:
        raise HorizonExceeded(f"{count} path(s) reached the horizon t_cap={t_cap:.4g}", count=count)
    keep = ~over
    meta = {"dt": dt, "t_cap": t_cap, "seed": config.seed, "bridge_correction": config.bridge_correction}
    meta.update(extra)
    return EstimateSet(tau[keep], area[keep], side[keep], hi[keep], lo[keep], res[keep], count, meta)


def sample_first_exit(params: ResettingParams, x0: float, config: SimConfig, stream_id: int) -> FirstExitSample:
    """One path from ``x0``; the same ``(seed, stream_id)`` always gives the same sample."""
    _, xs = translate_to_origin(params, x0)
    ref = float(analytic.fet_mean(params, x0))
    raw = _simulate(params, np.array([xs], dtype=float), np.array([stream_id], dtype=np.int64), config, ref)
    tau, area, side, hi, lo, res, _, t_cap = raw
    if side[0] == HORIZON:
        raise HorizonExceeded(f"path {stream_id} reached the horizon t_cap={t_cap:.4g}", count=1)
    return FirstExitSample(float(tau[0]), float(area[0]), "left" if side[0] == LEFT else "right",
                           float(hi[0]), float(lo[0]), int(res[0]))


def simulate_paths(params: ResettingParams, starts, config: SimConfig, first_path: int = 0):
    """Raw arrays for explicit start positions (original coordinates)."""
    starts = np.atleast_1d(np.asarray(starts, dtype=float))
    _, xs = translate_to_origin(params, starts)
    paths = np.arange(first_path, first_path + starts.size, dtype=np.int64)
    ref = float(np.max(analytic.fet_mean(params, starts)))
    return _collect(_simulate(params, np.asarray(xs, float), paths, config, ref), config, {})


def estimate_statistics(params: ResettingParams, x0: float, config: SimConfig) -> EstimateSet:
    """``config.n_paths`` independent samples from ``x0`` (paths ``0 .. n-1``)."""
    _, xs = translate_to_origin(params, x0)
    if not params.a < x0 < params.b:
        raise DomainError("x0 must lie inside the open interval")
    starts = np.full(config.n_paths, xs, dtype=float)
    paths = np.arange(config.n_paths, dtype=np.int64)
    ref = float(analytic.fet_mean(params, x0))
    return _collect(_simulate(params, starts, paths, config, ref), config, {"x0": x0})


def estimate_with_random_start(density, params: ResettingParams, config: SimConfig) -> EstimateSet:
    """Like :func:`estimate_statistics` with ``eta`` drawn from ``density`` per path.

    ``density`` must provide ``sample_from_uniform(u)`` (inverse CDF on the
    original coordinates).  Starts on the boundary give ``tau = 0``.
    """
    paths = np.arange(config.n_paths, dtype=np.int64)
    u = start_uniforms(config.seed, paths)
    eta = np.asarray(density.sample_from_uniform(u), dtype=float)
    _, xs = translate_to_origin(params, eta)
    return _collect(_simulate(params, np.asarray(xs, float), paths, config, 0.0), config,
                    {"density": type(density).__name__})
