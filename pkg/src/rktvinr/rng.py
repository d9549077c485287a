"""Portable random streams.

All randomness in the package comes from Philox4x64-10 (a counter-based
generator) keyed directly by ``seed + (stream << 64)``; numpy's
``SeedSequence`` hashing is bypassed so the raw 64-bit sequence depends only
on the published Philox algorithm.  Uniform doubles are built as
``((x >> 11) + 0.5) * 2**-53`` which lands strictly inside (0, 1).

Reference: ``raw_uint64(0, 0, 4)`` must equal ``REFERENCE_SEQUENCE``.  The
counter is incremented before each 4-word block, so the first block is
Philox4x64-10 of counter (1, 0, 0, 0) under key (seed, stream).
"""
from __future__ import annotations

import numpy as np

# Stream ids keep independent consumers from sharing draws under one seed.
STREAM_NOISE = 0
STREAM_INIT = 1
STREAM_HOLDOUT = 2

REFERENCE_SEQUENCE = (
    0x02F4BA6408E4D89B,
    0x3DD62B0B9CA8C5B2,
    0x1C8667A55D902E79,
    0x907D7A052FD5B4DC,
)


def _bitgen(seed: int, stream: int) -> np.random.Philox:
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.Philox(key=int(seed) + (int(stream) << 64))


def raw_uint64(seed: int, stream: int, size: int) -> np.ndarray:
    bg = _bitgen(seed, stream)
    return bg.random_raw(size).astype(np.uint64)


def uniform01(seed: int, stream: int, size: int) -> np.ndarray:
    """Uniform doubles in the open interval (0, 1)."""
    x = raw_uint64(seed, stream, size)
    return ((x >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def uniform(seed: int, stream: int, low: float, high: float, size: int) -> np.ndarray:
    return low + (high - low) * uniform01(seed, stream, size)


def standard_normal(seed: int, stream: int, size: int) -> np.ndarray:
    """Box-Muller over consecutive uniform pairs (cos branch first, then sin)."""
    npairs = (size + 1) // 2
    u = uniform01(seed, stream, 2 * npairs).reshape(npairs, 2)
    r = np.sqrt(-2.0 * np.log(u[:, 0]))
    phi = 2.0 * np.pi * u[:, 1]
    z = np.column_stack([r * np.cos(phi), r * np.sin(phi)]).ravel()
    return z[:size]


def standard_laplace(seed: int, stream: int, size: int) -> np.ndarray:
    """Unit-scale Laplace by inverse CDF."""
    u = uniform01(seed, stream, size) - 0.5
    return -np.sign(u) * np.log1p(-2.0 * np.abs(u))
