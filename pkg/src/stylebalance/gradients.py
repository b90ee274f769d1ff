"""Analytic gradients of the content and style terms, a finite-difference
verifier, and backpropagation of tap gradients down to the pixels.

For flattened pastiche activations M (shape H*W x C) with Gram G = M^T M and
a fixed target Gram T, the classic style term L = ||T - G||^2 / n has

    dL/dM = (4 / n) * M (G - T)

reshaped back to (H, W, C). The balanced term divides the classic term by
its sup bound; the denominator is treated as a frozen constant of the
evaluation point (no gradient flows through it), so the balanced gradient is
exactly the classic gradient divided by the sup value, and the zero-sup
degenerate case maps to an all-zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import featnet
from .exceptions import ConfigError, DimensionError
from .losses import (DEFAULT_STYLE_TAPS, GramMatrix, classic_layer_loss, content_loss,
                     gram, norm_constant, sup_bound)
from .tensors import FeatureMap, Image, flatten_spatial
from .util import single_thread, stream_key, unit_floats
from .validation import check_count, check_positive, check_same_channels, check_same_shape


def content_grad(fc: FeatureMap, fp: FeatureMap) -> np.ndarray:
    """Gradient of mean-squared content loss w.r.t. the pastiche map.

    d/dFp mean((Fp - Fc)^2) = 2 (Fp - Fc) / count.
    """
    check_same_shape(fc.data, fp.data, "content feature")
    return 2.0 * (fp.data - fc.data) / fp.data.size


def style_grad_to_target(target: GramMatrix, fp: FeatureMap, n: float) -> np.ndarray:
    """Gradient of ||target - G(Fp)||^2 / n w.r.t. the pastiche map."""
    n = check_positive(n, "normalization constant")
    check_same_channels(target.channels, fp.channels, "Gram")
    m = flatten_spatial(fp)
    gp = gram(fp)
    d = (m @ (gp.data - target.data)) * (4.0 / n)
    return d.reshape(fp.data.shape)


def classic_style_grad(fs: FeatureMap, fp: FeatureMap, n: float) -> np.ndarray:
    """Classic style gradient with the style map supplying the target Gram."""
    return style_grad_to_target(gram(fs), fp, n)


def balanced_style_grad_to_target(target: GramMatrix, fp: FeatureMap, n: float) -> np.ndarray:
    """Balanced style gradient with a frozen sup denominator.

    Requires a nonneg target (sup's own precondition); returns the zero map
    when the sup vanishes (both Grams zero).
    """
    gp = gram(fp)
    s = sup_bound(target, gp, check_positive(n, "normalization constant"))
    if s == 0.0:
        return np.zeros_like(fp.data)
    return style_grad_to_target(target, fp, n) / s


def balanced_style_grad(fs: FeatureMap, fp: FeatureMap, n: float) -> np.ndarray:
    """Balanced style gradient between two feature maps (see the target form)."""
    return balanced_style_grad_to_target(gram(fs), fp, n)


def finite_diff_check(fn: Callable[[np.ndarray], float], point: np.ndarray,
                      analytic: np.ndarray, eps: float = 1e-5) -> float:
    """Largest relative deviation between ``analytic`` and central differences.

    Each coordinate i is displaced by eps * max(1, |x_i|); deviations are
    measured against max(|analytic_i|, |numeric_i|, 1e-12) so zero gradients
    are comparable. ``fn`` receives the full (temporarily modified) array
    and must return a scalar.
    """
    x = np.array(point, dtype=np.float64)
    a = np.asarray(analytic, dtype=np.float64)
    if a.shape != x.shape:
        raise DimensionError(f"analytic gradient shape {a.shape} != point shape {x.shape}")
    eps = check_positive(eps, "eps")
    flat = x.reshape(-1)
    aflat = a.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        h = eps * max(1.0, abs(orig))
        flat[i] = orig + h
        f_plus = float(fn(x))
        flat[i] = orig - h
        f_minus = float(fn(x))
        flat[i] = orig
        numeric = (f_plus - f_minus) / (2.0 * h)
        denom = max(abs(aflat[i]), abs(numeric), 1e-12)
        worst = max(worst, abs(numeric - aflat[i]) / denom)
    return worst


def backprop_pixels(net: featnet.FeatNet, image: Image,
                    layer_grads: Sequence[tuple[str, np.ndarray]],
                    cache: featnet.ForwardCache | None = None) -> np.ndarray:
    """Map gradients w.r.t. tapped activations to a gradient w.r.t. pixels.

    ``layer_grads`` holds (tap name, gradient array) pairs; repeated taps
    accumulate. A forward pass is run internally unless a matching ``cache``
    from forward_with_cache is supplied.
    """
    if not layer_grads:
        raise ConfigError("layer_grads must name at least one tap")
    injected: dict[int, np.ndarray] = {}
    for tap, g in layer_grads:
        idx = net.tap_index(tap)
        g = np.asarray(g, dtype=np.float64)
        injected[idx] = injected[idx] + g if idx in injected else g
    with single_thread():
        if cache is None:
            taps = [t for t, _ in layer_grads]
            _, cache = featnet._run_forward(net, image, taps, keep_cache=True)
        return featnet.backward_from_cache(net, cache, injected)


# ---------------------------------------------------------------------------
# seeded self-verification harness


FEATURE_TOL = 1e-6
PIXEL_TOL = 1e-4
STOP_GRADIENT_TOL = 1e-12


@dataclass(frozen=True)
class GradCheckSummary:
    """Worst finite-difference deviations found by :func:`run_gradcheck`.

    ``content``/``classic``/``balanced`` are feature-level checks of the
    three analytic gradients; ``pixels`` verifies backprop_pixels through
    the default network; ``stop_gradient`` is the largest entrywise
    relative gap between the balanced gradient and classic/sup.
    """

    content: float
    classic: float
    balanced: float
    pixels: float
    stop_gradient: float

    @property
    def worst_feature(self) -> float:
        return max(self.content, self.classic, self.balanced)

    def passed(self) -> bool:
        return (self.worst_feature <= FEATURE_TOL
                and self.pixels <= PIXEL_TOL
                and self.stop_gradient <= STOP_GRADIENT_TOL)


def _random_map(key: int, h: int, w: int, c: int) -> FeatureMap:
    return FeatureMap(unit_floats(key, h * w * c).reshape(h, w, c), nonneg=True)


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b) / denom))


def run_gradcheck(seed: int = 0, feature_instances: int = 100,
                  pixel_instances: int = 100, pixel_size: int = 8) -> GradCheckSummary:
    """Exercise every analytic gradient against central differences.

    Feature-level checks draw small random non-negative feature pairs (the
    balanced check freezes the sup denominator at the evaluation point, per
    its stop-gradient contract). The pixel check pushes a single-tap style
    objective through the default seed-keyed network on random interior
    images of ``pixel_size`` squared, rotating through the four taps.
    """
    check_count(feature_instances, "feature_instances", minimum=1)
    check_count(pixel_instances, "pixel_instances", minimum=0)
    worst = {"content": 0.0, "classic": 0.0, "balanced": 0.0,
             "pixels": 0.0, "stop": 0.0}
    with single_thread():
        for i in range(feature_instances):
            dims = unit_floats(stream_key(seed, 0xD1, i), 3)
            h = 2 + int(dims[0] * 3.0)
            w = 2 + int(dims[1] * 3.0)
            c = 1 + int(dims[2] * 4.0)
            fs = _random_map(stream_key(seed, 0x5E, i), h, w, c)
            fp = _random_map(stream_key(seed, 0xFA, i), h, w, c)
            fc = _random_map(stream_key(seed, 0xC0, i), h, w, c)
            n = float(c * c) if i % 2 == 0 else float(h * w)
            shape = fp.data.shape

            g = content_grad(fc, fp)
            err = finite_diff_check(
                lambda x: content_loss(fc, FeatureMap(x.reshape(shape))),
                fp.data, g)
            worst["content"] = max(worst["content"], err)

            target = gram(fs)
            g = classic_style_grad(fs, fp, n)
            err = finite_diff_check(
                lambda x: classic_layer_loss(target, gram(FeatureMap(x.reshape(shape))), n),
                fp.data, g)
            worst["classic"] = max(worst["classic"], err)

            s0 = sup_bound(target, gram(fp), n)
            g_bal = balanced_style_grad(fs, fp, n)
            err = finite_diff_check(
                lambda x: classic_layer_loss(target, gram(FeatureMap(x.reshape(shape))), n) / s0,
                fp.data, g_bal)
            worst["balanced"] = max(worst["balanced"], err)
            worst["stop"] = max(worst["stop"], _relative_gap(g_bal, classic_style_grad(fs, fp, n) / s0))

        net = featnet.build(featnet.default_config(seed))
        for j in range(pixel_instances):
            tap = DEFAULT_STYLE_TAPS[j % len(DEFAULT_STYLE_TAPS)]
            count = pixel_size * pixel_size * 3
            pix = 0.05 + 0.9 * unit_floats(stream_key(seed, 0xB0, j), count)
            image = Image(pix.reshape(pixel_size, pixel_size, 3))
            ref_pix = 0.05 + 0.9 * unit_floats(stream_key(seed, 0xB1, j), count)
            ref = Image(ref_pix.reshape(pixel_size, pixel_size, 3))
            target = gram(featnet.forward(net, ref, [tap])[tap])
            fp = featnet.forward(net, image, [tap])[tap]
            n = norm_constant(fp)
            feat_grad = style_grad_to_target(target, fp, n)
            pixel_grad = backprop_pixels(net, image, [(tap, feat_grad)])

            def objective(x, _tap=tap, _t=target, _n=n):
                f = featnet.forward(net, Image(x), [_tap])[_tap]
                return classic_layer_loss(_t, gram(f), _n)

            err = finite_diff_check(objective, image.data, pixel_grad)
            worst["pixels"] = max(worst["pixels"], err)

    return GradCheckSummary(content=worst["content"], classic=worst["classic"],
                            balanced=worst["balanced"], pixels=worst["pixels"],
                            stop_gradient=worst["stop"])
