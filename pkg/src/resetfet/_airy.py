"""Airy functions Ai, Bi and their derivatives for real arguments.

Maclaurin series for ``|z| <= SWITCH_RADIUS``; beyond that the standard
asymptotic expansions (exponential for ``z > 0``, oscillatory for ``z < 0``).
The series is summed in extended precision (mpmath) because its terms grow
like ``exp(2/3 |z|^{3/2})`` before cancelling for negative ``z``.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np

from .errors import NumericalError

SWITCH_RADIUS = 6.0
_SERIES_DPS = 40
_SERIES_TERMS = 200
_ASYM_TERMS = 40



def _series(z):
    with mp.workdps(_SERIES_DPS):
        z = mp.mpf(z)
        c1, c2 = mp.mpf(1) / (mp.power(3, mp.mpf(2) / 3) * mp.gamma(mp.mpf(2) / 3)), mp.mpf(1) / (
            mp.power(3, mp.mpf(1) / 3) * mp.gamma(mp.mpf(1) / 3)
        )
        z3 = z**3
        # f = sum 3^k (1/3)_k z^{3k}/(3k)!, g = sum 3^k (2/3)_k z^{3k+1}/(3k+1)!
        f, g, fp, gp = mp.mpf(1), z, mp.mpf(0), mp.mpf(1)
        tf, tg = mp.mpf(1), z
        for k in range(1, _SERIES_TERMS):
            tf = tf * z3 / ((3 * k - 1) * (3 * k))
            tg = tg * z3 / ((3 * k) * (3 * k + 1))
            f += tf
            g += tg
            fp += tf * 3 * k / z if z != 0 else 0
            gp += tg * (3 * k + 1) / z if z != 0 else 0
            if abs(tf) + abs(tg) < mp.mpf(10) ** (-_SERIES_DPS) * (abs(f) + abs(g)):
                break
        s3 = mp.sqrt(3)
        ai = c1 * f - c2 * g
        bi = s3 * (c1 * f + c2 * g)
        aip = c1 * fp - c2 * gp
        bip = s3 * (c1 * fp + c2 * gp)
        return float(ai), float(aip), float(bi), float(bip)


def _uk(n):
    u = [1.0]
    for k in range(1, n):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
    return u


_U = _uk(_ASYM_TERMS)
_V = [1.0] + [-(6 * k + 1) / (6 * k - 1) * _U[k] for k in range(1, _ASYM_TERMS)]


def _asum(coef, x, sign, start=0, step=1):
    out, term_prev = 0.0, math.inf
    for k in range(start, len(coef), step):
        term = coef[k] * (sign ** k) / x**k
        if abs(term) > term_prev:
            break
        out += term
        term_prev = abs(term)
    return out


def _osc_sum(coef, zeta, parity):
    out, prev = 0.0, math.inf
    for j in range(len(coef) // 2):
        k = 2 * j + parity
        term = (-1) ** j * coef[k] / zeta**k
        if abs(term) > prev:
            break
        out += term
        prev = abs(term)
    return out


def _asymptotic(z):
    if z > 0:
        zeta = 2.0 / 3.0 * z**1.5
        q = z**0.25
        e = math.exp(-zeta)
        ai = e / (2 * math.sqrt(math.pi) * q) * _asum(_U, zeta, -1)
        aip = -q * e / (2 * math.sqrt(math.pi)) * _asum(_V, zeta, -1)
        ep = math.exp(zeta)
        bi = ep / (math.sqrt(math.pi) * q) * _asum(_U, zeta, 1)
        bip = q * ep / math.sqrt(math.pi) * _asum(_V, zeta, 1)
        return ai, aip, bi, bip
    w = -z
    zeta = 2.0 / 3.0 * w**1.5
    q = w**0.25
    # even / odd parts with alternating signs, cut at the smallest term
    pu = _osc_sum(_U, zeta, 0)
    qu = _osc_sum(_U, zeta, 1)
    pv = _osc_sum(_V, zeta, 0)
    qv = _osc_sum(_V, zeta, 1)
    ph = zeta - math.pi / 4
    c, s = math.cos(ph), math.sin(ph)
    sp = math.sqrt(math.pi)
    ai = (c * pu + s * qu) / (sp * q)
    bi = (-s * pu + c * qu) / (sp * q)
    aip = q * (s * pv - c * qv) / sp
    bip = q * (c * pv + s * qv) / sp
    return ai, aip, bi, bip


def airy(z):
    """Return ``(Ai, Ai', Bi, Bi')`` at real ``z`` (scalar or array)."""
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty((4, zs.size))
    for i, zi in enumerate(zs):
        out[:, i] = _series(zi) if abs(zi) <= SWITCH_RADIUS else _asymptotic(zi)
    if np.ndim(z) == 0:
        return tuple(float(v[0]) for v in out)
    return tuple(v.reshape(np.shape(z)) for v in out)


def switchover_mismatch():
    """Largest relative difference between series and asymptotics at ``|z| = SWITCH_RADIUS``."""
    worst = 0.0
    for z in (SWITCH_RADIUS, -SWITCH_RADIUS):
        a, b = np.array(_series(z)), np.array(_asymptotic(z))
        scale = np.maximum(np.abs(a), 1e-300)
        if z < 0:
            # oscillatory: compare against the envelope, not pointwise magnitude
            scale = np.full(4, max(abs(a[0]) + abs(a[2]), abs(a[1]) + abs(a[3])))
        worst = max(worst, float(np.max(np.abs(a - b) / scale)))
    return worst


def check_switchover(tol=1e-9):
    m = switchover_mismatch()
    if m > tol:
        raise NumericalError(f"Airy series/asymptotic mismatch {m:.3e} at the switchover exceeds {tol}")
    return m
