"""Philox4x32-10 counter-based generator, compiled with numba.

A random block is a pure function of ``(key, counter)``; paths use the
counter words ``(index_lo, index_hi | domain, path_lo, path_hi)`` so every
path owns disjoint streams whatever the thread schedule.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)

# domain bits in the second counter word
DOMAIN_STEP = 0
DOMAIN_RESET = 1 << 31
DOMAIN_START = 1 << 30

_TWO32 = 4294967296.0


@nb.njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on 32-bit words held in uint64 values."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT, p0 & _MASK
        hi1, lo1 = p1 >> _SHIFT, p1 & _MASK
        c0, c1, c2, c3 = (hi1 ^ c1 ^ k0) & _MASK, lo1, (hi0 ^ c3 ^ k1) & _MASK, lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def uniform_block(seed, path, domain, index):
    """Four uniforms in ``(0, 1)`` for ``(seed, path, domain, index)``."""
    k0 = np.uint64(seed) & _MASK
    k1 = (np.uint64(seed) >> _SHIFT) & _MASK
    c0 = np.uint64(index) & _MASK
    c1 = ((np.uint64(index) >> _SHIFT) & np.uint64(0x3FFFFFFF)) | np.uint64(domain)
    c2 = np.uint64(path) & _MASK
    c3 = (np.uint64(path) >> _SHIFT) & _MASK
    o0, o1, o2, o3 = philox4x32(c0, c1, c2, c3, k0, k1)
    return (
        (np.float64(o0) + 0.5) / _TWO32,
        (np.float64(o1) + 0.5) / _TWO32,
        (np.float64(o2) + 0.5) / _TWO32,
        (np.float64(o3) + 0.5) / _TWO32,
    )


@nb.njit(cache=True)
def _raw(c0, c1, c2, c3, k0, k1):
    return philox4x32(np.uint64(c0), np.uint64(c1), np.uint64(c2), np.uint64(c3), np.uint64(k0), np.uint64(k1))


def philox_raw(counter, key):
    """Single block as four ints, for known-answer tests."""
    return tuple(int(v) for v in _raw(*[int(c) for c in counter], *[int(k) for k in key]))


@nb.njit(cache=True)
def _start_uniforms(seed, paths):
    out = np.empty(paths.size)
    for i in range(paths.size):
        out[i] = uniform_block(seed, paths[i], DOMAIN_START, 0)[0]
    return out


def start_uniforms(seed: int, paths) -> np.ndarray:
    """One uniform per path from the start-position stream."""
    return _start_uniforms(np.uint64(seed), np.asarray(paths, dtype=np.int64))
