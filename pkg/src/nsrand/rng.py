"""Counter-based Gaussian coefficients.

Philox4x64-10 (Salmon et al., SC'11) evaluated elementwise with numpy, so
that the coefficient of cube ``j`` in sample ``i`` under ``seed`` is a pure
function of ``(seed, i, j)``.  The bit stream matches
:class:`numpy.random.Philox`, which the tests use as an oracle.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

# second key word; separates this stream from other uses of the same seed
STREAM_TAG = 0x6E73_7261_6E64_0001
PROFILE_TAG = 0x6E73_7261_6E64_0002


def _mulhilo(a: np.uint64, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a_lo, a_hi = a & _LO32, a >> _S32
    b_lo, b_hi = b & _LO32, b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _LO32) + (hl & _LO32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    lo = a * b
    return hi, lo


def philox4x64(counter, key, rounds: int = 10) -> np.ndarray:
    """Philox4x64 block function.

    ``counter`` has shape ``(..., 4)`` and ``key`` shape ``(2,)`` or
    ``(..., 2)``; both uint64.  Returns an array shaped like ``counter``.
    """
    c = np.asarray(counter, dtype=np.uint64)
    k = np.broadcast_to(np.asarray(key, dtype=np.uint64), c.shape[:-1] + (2,))
    x0, x1, x2, x3 = (c[..., i].copy() for i in range(4))
    k0, k1 = k[..., 0].copy(), k[..., 1].copy()
    with np.errstate(over="ignore"):
        for r in range(rounds):
            if r:
                k0 = k0 + _W0
                k1 = k1 + _W1
            hi0, lo0 = _mulhilo(_M0, x0)
            hi1, lo1 = _mulhilo(_M1, x2)
            x0, x1, x2, x3 = hi1 ^ x1 ^ k0, lo1, hi0 ^ x3 ^ k1, lo0
    return np.stack([x0, x1, x2, x3], axis=-1)


def gaussians_at(seed: int, sample_index: int, j, stream: int = STREAM_TAG) -> np.ndarray:
    """Complex Gaussians ``g_j`` with independent N(0, 1/2) real and imaginary parts.

    Box-Muller on two 53-bit uniforms taken from the Philox block with
    counter ``(j, sample_index, 0, 0)`` and key ``(seed, stream)``.
    """
    j = np.atleast_1d(np.asarray(j, dtype=np.uint64))
    ctr = np.zeros(j.shape + (4,), dtype=np.uint64)
    ctr[..., 0] = j
    ctr[..., 1] = np.uint64(sample_index)
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream], dtype=np.uint64)
    x = philox4x64(ctr, key)
    u1 = ((x[..., 0] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    u2 = (x[..., 1] >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    r = np.sqrt(-np.log(u1))
    theta = 2.0 * np.pi * u2
    return r * np.cos(theta) + 1j * r * np.sin(theta)
