"""Central differences with Richardson extrapolation (Ridders' tableau)."""

from __future__ import annotations

import numpy as np

from .errors import NumericalError

# offsets, weights, denominator for O(h^2) central stencils of order n
_STENCILS = {
    1: ((-1, 1), (-1.0, 1.0), 2.0),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0), 1.0),
    3: ((-2, -1, 1, 2), (-1.0, 2.0, -2.0, 1.0), 2.0),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0), 1.0),
}


def _central(f, x0, n, h):
    offsets, weights, den = _STENCILS[n]
    pts = np.array([x0 + k * h for k in offsets])
    vals = np.real(np.asarray(f(pts), dtype=complex))
    return float(np.dot(weights, vals)) / (den * h**n)


def derivative(f, x0, n, h0=1e-2, *, rtol=1e-4, atol=1e-12, levels=10):
    """``n``-th derivative of ``f`` at ``x0`` for ``n`` in 1..4.

    ``f`` must accept a 1-d array of abscissae.  The step ladder is
    ``h0, h0/2, h0/4, ...``; the tableau stops as soon as the error estimate
    starts growing.  Returns ``(value, error_estimate)``.
    """
    if n not in _STENCILS:
        raise ValueError(f"derivative order must be 1..4, got {n}")
    table = [[_central(f, x0, n, h0)]]
    best, best_err = table[0][0], np.inf
    for i in range(1, levels):
        h = h0 / 2**i
        row = [_central(f, x0, n, h)]
        for j in range(1, i + 1):
            fac = 4.0**j
            row.append(row[j - 1] + (row[j - 1] - table[i - 1][j - 1]) / (fac - 1.0))
            err = max(abs(row[j] - row[j - 1]), abs(row[j] - table[i - 1][j - 1]))
            if err <= best_err:
                best, best_err = row[j], err
        table.append(row)
        if abs(row[i] - table[i - 1][i - 1]) >= 2.0 * best_err:
            break
    if not best_err <= rtol * abs(best) + atol:
        raise NumericalError(
            f"derivative of order {n} did not converge: estimate {best!r}, error {best_err!r}"
        )
    return best, best_err


def richardson_limit(values, *, power=1, rtol=1e-8, atol=0.0):
    """Extrapolate ``F(h_i)``, ``h_i = h0 / 2**i``, to ``h -> 0``.

    The error of ``F`` is assumed to be a power series in ``h**power``.
    Works with any number type supporting arithmetic (floats, mpmath).
    """
    table = [list(values)]
    for j in range(1, len(values)):
        fac = 2 ** (power * j)
        prev = table[-1]
        table.append([(fac * prev[i + 1] - prev[i]) / (fac - 1) for i in range(len(prev) - 1)])
    est, prev_est = table[-1][0], table[-2][-1]
    if abs(est - prev_est) > rtol * abs(est) + atol:
        raise NumericalError(
            f"extrapolation unstable: successive estimates {float(prev_est)!r}, {float(est)!r}"
        )
    return est
