"""Overflow-safe evaluation of sums of ``exp(a) * sinh(z)`` / ``exp(a) * cosh(z)``.

A closed form is written as a ratio of such sums.  All terms of a ratio are
multiplied by a common ``exp(-s)`` where ``s`` is the dominant exponent, so
the ratio is unchanged while nothing overflows.  Below ``SCALE_THRESHOLD``
the plain ``sinh``/``cosh`` are used so small arguments keep full relative
precision.
"""

from __future__ import annotations

import numpy as np

SCALE_THRESHOLD = 30.0


def common_shift(*terms):
    """Shift ``s`` for a list of ``(a, z)`` exponent pairs (elementwise)."""
    tops = [np.real(a) + np.abs(np.real(z)) for a, z in terms]
    m = np.maximum.reduce(np.broadcast_arrays(*tops))
    return np.where(m > SCALE_THRESHOLD, m, 0.0)


def esinh(a, z, s):
    """``exp(a - s) * sinh(z)``."""
    with np.errstate(over="ignore", invalid="ignore"):
        scaled = 0.5 * (np.exp(a + z - s) - np.exp(a - z - s))
        plain = np.exp(a) * np.sinh(z)
    return np.where(s > 0, scaled, plain)


def ecosh(a, z, s):
    """``exp(a - s) * cosh(z)``."""
    with np.errstate(over="ignore", invalid="ignore"):
        scaled = 0.5 * (np.exp(a + z - s) + np.exp(a - z - s))
        plain = np.exp(a) * np.cosh(z)
    return np.where(s > 0, scaled, plain)


def expm1_ratio(p, q):
    """``(1 - exp(-p)) / (1 - exp(-q))`` for ``p, q`` of equal sign, ``q != 0``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        pos = np.expm1(-p) / np.expm1(-q)
        neg = np.exp(q - p) * np.expm1(p) / np.expm1(q)
    return np.where(q >= 0, pos, neg)


def as_output(value, *inputs):
    """Return a Python scalar when every input was a scalar."""
    if all(np.ndim(v) == 0 for v in inputs):
        v = np.asarray(value)[()]
        return complex(v) if np.iscomplexobj(v) else float(v)
    return np.asarray(value)
