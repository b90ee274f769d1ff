"""Gram statistics, the classic layerwise style loss, its attainable bounds,
and the magnitude-balanced variant.

For a layer activation flattened to an (H*W, C) matrix F, the Gram matrix is
G = F^T F. The classic layerwise style loss between a style Gram G_s and a
pastiche Gram G_p is ||G_s - G_p||_F^2 / N for a normalization constant N.
Expanding the square,

    ||G_s - G_p||^2 = ||G_s||^2 + ||G_p||^2 - 2 <G_s, G_p>.

When both Grams are entrywise non-negative (true for post-ReLU activations)
the cross term lies in [0, ||G_s|| * ||G_p||], which pins the loss between
two attainable bounds:

    inf = (||G_s|| - ||G_p||)^2 / N        (cross term at its Cauchy-Schwarz max)
    sup = (||G_s||^2 + ||G_p||^2) / N      (cross term at zero)

The upper bound is attained exactly when the entrywise product G_s * G_p is
zero (disjoint support); the lower bound when one Gram is a non-negative
multiple of the other. Dividing the classic loss by its sup maps every
(style, pastiche) pair onto [0, 1] regardless of the style's Gram magnitude,
and the ratio is invariant under joint scaling of the two feature maps, so
differently "loud" styles become comparable. N cancels in the ratio.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionError, PreconditionError
from .tensors import FeatureMap, flatten_spatial, mse
from .validation import check_nonnegative, check_positive, check_same_channels, check_same_shape

SYMMETRY_TOL = 1e-12
PSD_TOL = -1e-9

#: Tap names of the default extractor, shallowest to deepest.
DEFAULT_STYLE_TAPS = ("b1_r2", "b2_r2", "b3_r3", "b4_r3")
DEFAULT_CONTENT_TAP = "b3_r3"


class Normalization(str, enum.Enum):
    """How the per-layer normalization constant N is derived from a map.

    ``channels_squared`` divides by C*C (the usual Gram-MSE convention);
    ``spatial_product`` divides by H*W. The choice cancels in the balanced
    loss, so it only affects raw classic values and their bounds.
    """

    CHANNELS_SQUARED = "channels_squared"
    SPATIAL_PRODUCT = "spatial_product"


@dataclass(frozen=True)
class GramMatrix:
    """A symmetric (C, C) matrix of channel co-activations.

    ``nonneg`` asserts every entry is >= 0; it is inherited from the feature
    map's flag and gates sup_bound / balanced_layer_loss.
    """

    data: np.ndarray
    nonneg: bool = False

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C")
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"Gram matrix must be square, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("Gram matrix contains non-finite values")
        if float(np.max(np.abs(arr - arr.T), initial=0.0)) > SYMMETRY_TOL:
            raise PreconditionError("Gram matrix is not symmetric within 1e-12")
        if self.nonneg and float(arr.min()) < 0.0:
            raise PreconditionError("Gram matrix flagged nonneg has negative entries")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class LayerSpec:
    """One tapped layer and its non-negative aggregation weight."""

    tap: str
    weight: float = 1.0

    def __post_init__(self):
        if not self.tap:
            raise PreconditionError("layer tap name must be non-empty")
        check_nonnegative(self.weight, "layer weight")


@dataclass(frozen=True)
class LossConfig:
    """Which taps contribute to the style and content terms, and how."""

    style_layers: tuple[LayerSpec, ...] = tuple(LayerSpec(t) for t in DEFAULT_STYLE_TAPS)
    content_layer: str = DEFAULT_CONTENT_TAP
    beta: float = 1.0
    normalization: Normalization = Normalization.CHANNELS_SQUARED

    def __post_init__(self):
        layers = tuple(self.style_layers)
        if not layers:
            raise PreconditionError("style_layers must be non-empty")
        taps = [s.tap for s in layers]
        if len(set(taps)) != len(taps):
            raise PreconditionError(f"style_layers taps must be distinct, got {taps}")
        if not self.content_layer:
            raise PreconditionError("content_layer must be non-empty")
        check_positive(self.beta, "beta")
        object.__setattr__(self, "style_layers", layers)
        object.__setattr__(self, "normalization", Normalization(self.normalization))


def default_loss_config(**overrides) -> LossConfig:
    return LossConfig(**overrides)


@dataclass(frozen=True)
class LayerLossReport:
    """Classic loss, its two bounds, and the balanced value for one tap.

    Maintains inf <= classic <= sup (up to rounding) and balanced in [0, 1]
    with balanced = classic / sup whenever sup > 0, else 0.
    """

    tap: str
    classic: float
    sup: float
    inf: float
    balanced: float


@dataclass(frozen=True)
class TaskBatch:
    """A list of (style id, content id) tasks with positive mixing weights."""

    tasks: tuple[tuple[str, str], ...]
    lambdas: tuple[float, ...]

    def __post_init__(self):
        tasks = tuple((str(s), str(c)) for s, c in self.tasks)
        lambdas = tuple(float(v) for v in self.lambdas)
        if len(tasks) != len(lambdas):
            raise DimensionError(
                f"tasks and lambdas differ in length: {len(tasks)} vs {len(lambdas)}")
        for v in lambdas:
            check_positive(v, "task weight")
        object.__setattr__(self, "tasks", tasks)
        object.__setattr__(self, "lambdas", lambdas)


# ---------------------------------------------------------------------------
# operations


def gram(f: FeatureMap) -> GramMatrix:
    """Gram matrix F^T F of the spatially flattened activations.

    The result is symmetrized to remove the last-ulp asymmetry a blocked
    matmul can leave, and inherits the map's non-negativity flag (products
    of non-negative activations are non-negative).
    """
    m = flatten_spatial(f)
    g = m.T @ m
    g = (g + g.T) * 0.5
    return GramMatrix(g, nonneg=f.nonneg)


def norm_constant(f: FeatureMap, mode: Normalization = Normalization.CHANNELS_SQUARED) -> float:
    """Per-layer normalization constant N for ``f`` under ``mode``."""
    mode = Normalization(mode)
    if mode is Normalization.SPATIAL_PRODUCT:
        return float(f.height * f.width)
    return float(f.channels * f.channels)


def _check_pair(gs: GramMatrix, gp: GramMatrix, n: float) -> float:
    check_same_channels(gs.channels, gp.channels, "Gram")
    return check_positive(n, "normalization constant")


def classic_layer_loss(gs: GramMatrix, gp: GramMatrix, n: float) -> float:
    """||G_s - G_p||_F^2 / n. Symmetric in its two Gram arguments."""
    n = _check_pair(gs, gp, n)
    d = gs.data - gp.data
    return float(np.sum(d * d)) / n


def sup_bound(gs: GramMatrix, gp: GramMatrix, n: float) -> float:
    """(||G_s||^2 + ||G_p||^2) / n, an attainable upper bound on the classic loss.

    Valid only for entrywise non-negative Grams, so both inputs must carry
    the ``nonneg`` flag; equality holds iff the entrywise product is zero.
    """
    n = _check_pair(gs, gp, n)
    if not gs.nonneg:
        raise PreconditionError("sup_bound requires a nonneg-flagged first Gram")
    if not gp.nonneg:
        raise PreconditionError("sup_bound requires a nonneg-flagged second Gram")
    return (float(np.sum(gs.data * gs.data)) + float(np.sum(gp.data * gp.data))) / n


def inf_bound(gs: GramMatrix, gp: GramMatrix, n: float) -> float:
    """(||G_s|| - ||G_p||)^2 / n, an attainable lower bound on the classic loss.

    Follows from Cauchy-Schwarz alone; equality holds when one Gram is a
    non-negative multiple of the other.
    """
    n = _check_pair(gs, gp, n)
    d = float(np.linalg.norm(gs.data)) - float(np.linalg.norm(gp.data))
    return d * d / n


def balanced_layer_loss(gs: GramMatrix, gp: GramMatrix, n: float) -> float:
    """Classic loss divided by its sup bound, clipped to [0, 1].

    Degenerate case: if both Grams are zero the sup vanishes and the value
    is defined as 0 (a zero-feature pair is a perfect match). The n passed
    in cancels but is still validated for interface consistency.
    """
    _check_pair(gs, gp, n)
    s = sup_bound(gs, gp, 1.0)
    if s == 0.0:
        return 0.0
    value = classic_layer_loss(gs, gp, 1.0) / s
    return min(1.0, max(0.0, value))


def layer_report(tap: str, gs: GramMatrix, gp: GramMatrix, n: float) -> LayerLossReport:
    """Bundle classic/sup/inf/balanced for one tap into a report row."""
    return LayerLossReport(
        tap=tap,
        classic=classic_layer_loss(gs, gp, n),
        sup=sup_bound(gs, gp, n),
        inf=inf_bound(gs, gp, n),
        balanced=balanced_layer_loss(gs, gp, n),
    )


def style_loss_total(reports: Iterable[tuple[LayerSpec, float]]) -> float:
    """Weighted sum of per-layer losses: sum_l w_l * value_l."""
    total = 0.0
    for spec, value in reports:
        total += spec.weight * float(value)
    return total


def content_loss(fc: FeatureMap, fp: FeatureMap) -> float:
    """Mean squared difference of two equally-shaped feature maps."""
    check_same_shape(fc.data, fp.data, "content feature")
    return mse(fc.data, fp.data)


def nst_total(content: float, style: float, beta: float) -> float:
    """Combined objective content + beta * style with beta > 0."""
    beta = check_positive(beta, "beta")
    return float(content) + beta * float(style)


def batch_aggregate(losses: Sequence[float], lambdas: Sequence[float]) -> float:
    """sum_k lambda_k * loss_k over equally long sequences.

    With lambda_k = 1/len this is the batch mean; a zero weight masks a
    task out (strict positivity is a TaskBatch invariant, not enforced
    here).
    """
    if len(losses) != len(lambdas):
        raise DimensionError(
            f"losses and lambdas differ in length: {len(losses)} vs {len(lambdas)}")
    total = 0.0
    for loss, lam in zip(losses, lambdas):
        total += float(lam) * float(loss)
    return total


def interpolated_style_target(gs: GramMatrix, gc: GramMatrix, alpha: float) -> GramMatrix:
    """Entrywise blend alpha * G_style + (1 - alpha) * G_content.

    Used as a synthetic optimization target whose distance from the content
    statistics is controlled; with alpha in [0, 1] non-negativity survives
    the blend.
    """
    check_same_channels(gs.channels, gc.channels, "Gram")
    a = float(alpha)
    data = a * gs.data + (1.0 - a) * gc.data
    nonneg = gs.nonneg and gc.nonneg and 0.0 <= a <= 1.0
    return GramMatrix(data, nonneg=nonneg)
