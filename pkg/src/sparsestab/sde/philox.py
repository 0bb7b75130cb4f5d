"""Philox4x32-10 counter-based generator (Salmon et al., SC'11) for numba kernels.

A normal draw is a pure function of ``(seed, step, channel pair, path, stream)``
so any schedule of paths over threads reproduces the same numbers.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

TWO_PI = 2.0 * np.pi
INV_2_53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten rounds on a 128-bit counter; every argument is a uint64 holding 32 bits."""
    for r in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0 = (hi1 ^ c1 ^ k0) & _MASK
        c1 = lo1
        c2 = (hi0 ^ c3 ^ k1) & _MASK
        c3 = lo0
        if r < 9:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def normal_pair(step, pair, path, stream, k0, k1):
    """Two independent N(0, 1) draws via Box-Muller on 53-bit uniforms."""
    x0, x1, x2, x3 = philox4x32(np.uint64(step) & _MASK, np.uint64(pair) & _MASK,
                                np.uint64(path) & _MASK, np.uint64(stream) & _MASK,
                                k0, k1)
    # (x0 >> 5, x1 >> 6) -> 27 + 26 bits; the half offset keeps u1 away from 0
    u1 = ((x0 >> np.uint64(5)) * np.uint64(67108864) + (x1 >> np.uint64(6)) + 0.5) * INV_2_53
    u2 = ((x2 >> np.uint64(5)) * np.uint64(67108864) + (x3 >> np.uint64(6))) * INV_2_53
    r = np.sqrt(-2.0 * np.log(u1))
    return r * np.cos(TWO_PI * u2), r * np.sin(TWO_PI * u2)


def split_seed(seed: int):
    """64-bit seed -> (low, high) key words."""
    s = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(s & 0xFFFFFFFF), np.uint64(s >> 32)


@nb.njit(cache=True)
def _block(step, stream, paths, channels, k0, k1, out):
    for p in range(paths):
        for q in range((channels + 1) // 2):
            a, b = normal_pair(step, q, p, stream, k0, k1)
            out[p, 2 * q] = a
            if 2 * q + 1 < channels:
                out[p, 2 * q + 1] = b


def normal_block(seed: int, step: int, stream: int, paths: int, channels: int) -> np.ndarray:
    """Standard normals for all paths and channels at one step, shape (paths, channels)."""
    k0, k1 = split_seed(seed)
    out = np.empty((paths, channels))
    if channels:
        _block(step, stream, paths, channels, k0, k1, out)
    return out


def philox_words(counter, key) -> tuple:
    """Raw generator output for a 4-word counter and 2-word key (plain ints)."""
    c = [np.uint64(int(v) & 0xFFFFFFFF) for v in counter]
    k = [np.uint64(int(v) & 0xFFFFFFFF) for v in key]
    return tuple(int(v) for v in philox4x32(c[0], c[1], c[2], c[3], k[0], k[1]))
