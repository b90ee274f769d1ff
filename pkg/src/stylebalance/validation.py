"""Input validation helpers shared by the public entry points."""

from __future__ import annotations

import re

import numpy as np

from .exceptions import DataError, DimensionError, PreconditionError
from .tensors import FeatureMap, Image

_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


def check_positive(value, name: str) -> float:
    v = float(value)
    if not np.isfinite(v) or v <= 0.0:
        raise PreconditionError(f"{name} must be positive and finite, got {value!r}")
    return v


def check_nonnegative(value, name: str) -> float:
    v = float(value)
    if not np.isfinite(v) or v < 0.0:
        raise PreconditionError(f"{name} must be >= 0 and finite, got {value!r}")
    return v


def check_count(value, name: str, minimum: int = 0) -> int:
    v = int(value)
    if v != value or v < minimum:
        raise PreconditionError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return v


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what} shapes differ: {a.shape} vs {b.shape}")


def check_same_channels(ca: int, cb: int, what: str) -> None:
    if ca != cb:
        raise DimensionError(f"{what} channel counts differ: {ca} vs {cb}")


def as_image(obj) -> Image:
    """Accept an Image or any (H, W, C) array-like with values in [0, 1]."""
    if isinstance(obj, Image):
        return obj
    return Image(np.asarray(obj, dtype=np.float64))


def as_feature_map(obj, nonneg: bool = False) -> FeatureMap:
    """Accept a FeatureMap or any (H, W, C) array-like."""
    if isinstance(obj, FeatureMap):
        return obj
    return FeatureMap(np.asarray(obj, dtype=np.float64), nonneg=nonneg)


def check_identifier(value: str, what: str, where: str = "") -> str:
    """Validate the restricted id charset used by every CSV schema."""
    if not isinstance(value, str) or not _ID_RE.match(value):
        suffix = f" ({where})" if where else ""
        raise DataError(f"{what} {value!r} is not a valid identifier "
                        f"(allowed characters: A-Za-z0-9_.-){suffix}")
    return value
