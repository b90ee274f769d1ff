"""Seeded procedural texture images for experiments and self-checks.

Four pattern families (gratings, checkerboards, blurred blobs, raw speckle)
are combined with per-channel gains and a global brightness drawn
log-uniformly from [1e-2, 1]. Because the default extractor has zero
biases, feature magnitudes scale linearly with brightness, so a set of
these textures exercises roughly eight orders of magnitude of Gram "volume",
mimicking the very uneven loudness of real style images.
"""

from __future__ import annotations

import numpy as np

from .tensors import Image
from .validation import check_count


def _grating(rng: np.random.Generator, size: int) -> np.ndarray:
    freq = rng.uniform(1.0, 10.0)
    theta = rng.uniform(0.0, np.pi)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    y, x = np.mgrid[0:size, 0:size] / size
    wave = np.sin(2.0 * np.pi * freq * (x * np.cos(theta) + y * np.sin(theta)) + phase)
    return 0.5 * (wave + 1.0)


def _checker(rng: np.random.Generator, size: int) -> np.ndarray:
    cell = int(rng.integers(2, max(3, size // 4)))
    y, x = np.mgrid[0:size, 0:size]
    return (((y // cell) + (x // cell)) % 2).astype(np.float64)


def _box_blur_1d(a: np.ndarray, radius: int, axis: int) -> np.ndarray:
    if radius <= 0:
        return a
    width = 2 * radius + 1
    padded = np.concatenate([np.flip(a.take(range(radius), axis=axis), axis=axis), a,
                             np.flip(a.take(range(a.shape[axis] - radius, a.shape[axis]),
                                            axis=axis), axis=axis)], axis=axis)
    csum = np.cumsum(padded, axis=axis)
    zero = np.zeros_like(csum.take([0], axis=axis))
    csum = np.concatenate([zero, csum], axis=axis)
    hi = csum.take(range(width, csum.shape[axis]), axis=axis)
    lo = csum.take(range(0, csum.shape[axis] - width), axis=axis)
    return (hi - lo) / width


def _blobs(rng: np.random.Generator, size: int) -> np.ndarray:
    noise = rng.uniform(0.0, 1.0, size=(size, size))
    radius = int(rng.integers(1, max(2, size // 8)))
    sm = _box_blur_1d(_box_blur_1d(noise, radius, 0), radius, 1)
    lo, hi = float(sm.min()), float(sm.max())
    return (sm - lo) / (hi - lo) if hi > lo else np.zeros_like(sm)


def _speckle(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=(size, size))


_FAMILIES = (_grating, _checker, _blobs, _speckle)


def texture_image(rng: np.random.Generator, size: int = 64, channels: int = 3) -> Image:
    """One random texture with log-uniform global brightness."""
    check_count(size, "size", minimum=4)
    family = _FAMILIES[int(rng.integers(0, len(_FAMILIES)))]
    base = family(rng, size)
    gains = rng.uniform(0.3, 1.0, size=channels)
    brightness = 10.0 ** rng.uniform(-2.0, 0.0)
    img = np.clip(brightness * base[:, :, None] * gains[None, None, :], 0.0, 1.0)
    return Image(img)


def texture_set(seed: int, count: int, size: int = 64, channels: int = 3) -> list[Image]:
    """``count`` textures from one seeded stream."""
    rng = np.random.default_rng(seed)
    return [texture_image(rng, size, channels) for _ in range(count)]


def noise_image(seed: int, size: int = 64, channels: int = 3) -> Image:
    """A plain uniform-noise image (useful as generic content)."""
    rng = np.random.default_rng(seed)
    return Image(rng.uniform(0.0, 1.0, size=(size, size, channels)))
