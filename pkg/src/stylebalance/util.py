"""Deterministic PRNG primitives and a single-thread guard for BLAS calls.

Everything that must be bit-reproducible across platforms (weight init, noise
images) is derived from splitmix64, a tiny counter-based mixer over uint64.
A stream is addressed by hashing a seed with one or two subkeys, so distinct
(layer, parameter) or (seed, task) pairs never collide in practice and no
sequential state has to be carried around.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np
from threadpoolctl import threadpool_limits

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """One splitmix64 output for the uint64 value ``x``."""
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` over a uint64 array."""
    z = (x + np.uint64(_GOLDEN))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, *subkeys: int) -> int:
    """Collapse (seed, subkey, ...) into one uint64 stream key."""
    k = mix64(seed & _MASK)
    for s in subkeys:
        k = mix64(k ^ (s & _MASK))
    return k


def unit_floats(key: int, count: int) -> np.ndarray:
    """``count`` doubles in [0, 1) drawn from the stream addressed by ``key``.

    The i-th value uses the top 53 bits of mix64(key ^ i), so the mapping is
    independent of how many values are requested.
    """
    idx = np.arange(count, dtype=np.uint64)
    z = mix64_array(np.uint64(key) ^ idx)
    return (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def symmetric_floats(key: int, count: int, scale: float) -> np.ndarray:
    """``count`` doubles in [-scale, scale) from the stream at ``key``."""
    return scale * (2.0 * unit_floats(key, count) - 1.0)


_tls = threading.local()


@contextmanager
def single_thread():
    """Pin BLAS pools to one thread for the duration of the block.

    Re-entrant: nested uses are no-ops, so hot loops can wrap each public
    call without paying the threadpoolctl inspection cost repeatedly.
    """
    if getattr(_tls, "active", False):
        yield
        return
    _tls.active = True
    try:
        with threadpool_limits(limits=1):
            yield
    finally:
        _tls.active = False
