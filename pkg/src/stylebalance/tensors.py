"""Dense containers for images and layer activations, plus basic reductions.

Arrays are float64 and laid out row-major as (y, x, channel). Containers
freeze their buffer after validation, so instances can be shared freely
between threads and reused as dictionary values without defensive copies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, PreconditionError


def _frozen_array(data, ndim: int, what: str) -> np.ndarray:
    arr = np.array(data, dtype=np.float64, order="C")
    if arr.ndim != ndim:
        raise DimensionError(f"{what} must have {ndim} dimensions, got shape {arr.shape}")
    if any(s <= 0 for s in arr.shape):
        raise DimensionError(f"{what} dimensions must be positive, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(f"{what} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FeatureMap:
    """Activations of one layer, stored as (height, width, channels).

    ``nonneg`` asserts that every entry is >= 0, which holds for any map
    taken directly after a ReLU. Operations whose derivation needs
    entrywise non-negativity (the sup bound, the balanced loss) check the
    flag rather than rescanning the data.
    """

    data: np.ndarray
    nonneg: bool = False

    def __post_init__(self):
        arr = _frozen_array(self.data, 3, "feature map")
        if self.nonneg and float(arr.min()) < 0.0:
            raise PreconditionError("feature map flagged nonneg has negative entries")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Image:
    """A pixel raster with values in [0, 1] and 1 (gray) or 3 (RGB) channels."""

    data: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.data, 3, "image")
        if arr.shape[2] not in (1, 3):
            raise DimensionError(f"image must have 1 or 3 channels, got {arr.shape[2]}")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise PreconditionError(f"image values must lie in [0, 1], got range [{lo}, {hi}]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def flatten_spatial(f: FeatureMap) -> np.ndarray:
    """View (H, W, C) activations as an (H*W, C) matrix.

    Row y*W + x holds the channel vector of pixel (y, x); the row-major
    buffer already has that layout, so this is a reshape, not a copy.
    """
    h, w, c = f.data.shape
    return f.data.reshape(h * w, c)


def frobenius_norm(m) -> float:
    """Square root of the sum of squared entries of ``m`` (any shape)."""
    arr = np.asarray(m, dtype=np.float64)
    return float(np.sqrt(np.sum(arr * arr)))


def mse(a, b) -> float:
    """Mean squared difference of two equally-shaped arrays."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"mse operands differ in shape: {x.shape} vs {y.shape}")
    d = x - y
    return float(np.mean(d * d))
