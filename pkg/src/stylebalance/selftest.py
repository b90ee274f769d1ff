"""Built-in verification suite: every worked example the library's contracts
promise, runnable on demand via the ``selftest`` subcommand.

Each fixture is a named zero-argument callable that raises AssertionError
(with a readable message) when its contract is broken. ``run`` executes the
registry in order and reports per-fixture outcomes; ``write_artifacts``
additionally produces a small deterministic sweep whose CSV and pixmap
outputs can be byte-compared across runs and machines.
"""

from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import fileio
from .analysis import (AnnotationRecord, FeatureBank, LossTable, MomentSpec,
                       correlation_report, deception_rate, expectation_bounds,
                       histogram, linear_fit, mc_expectation_bounds, pearson,
                       relaxed_bounds)
from .exceptions import (ConfigError, DataError, DimensionError, PreconditionError,
                         StyleBalanceError)
from .featnet import (AvgPool, Conv, FeatNet, Relu, build, default_config,
                      forward, forward_with_cache)
from .gradients import (balanced_style_grad, classic_style_grad, content_grad,
                        finite_diff_check)
from .losses import (GramMatrix, LayerSpec, LossConfig, Normalization,
                     balanced_layer_loss, batch_aggregate, classic_layer_loss,
                     content_loss, gram, inf_bound, interpolated_style_target,
                     norm_constant, nst_total, style_loss_total, sup_bound)
from .scoring import LossKind, evaluate_pair
from .stylizer import InitKind, OptimizeConfig, interpolation_baseline, stylize, sweep
from .tensors import FeatureMap, Image, flatten_spatial, frobenius_norm, mse
from .textures import noise_image, texture_set
from .util import single_thread

Fixture = Callable[[], None]
FIXTURES: list[tuple[str, Fixture]] = []


def fixture(name: str):
    def register(fn: Fixture) -> Fixture:
        FIXTURES.append((name, fn))
        return fn
    return register


# ---------------------------------------------------------------------------
# assertion helpers


def _eq(actual, expected, what: str) -> None:
    assert actual == expected, f"{what}: expected {expected!r}, got {actual!r}"


def _close(actual: float, expected: float, what: str, rel: float = 1e-12,
           abs_tol: float = 0.0) -> None:
    if not math.isclose(actual, expected, rel_tol=rel, abs_tol=abs_tol):
        raise AssertionError(f"{what}: expected {expected!r}, got {actual!r}")


def _arr_eq(actual, expected, what: str) -> None:
    a = np.asarray(actual, dtype=np.float64)
    e = np.asarray(expected, dtype=np.float64)
    assert a.shape == e.shape and np.array_equal(a, e), \
        f"{what}: expected {e.tolist()}, got {np.asarray(actual).tolist()}"


def _arr_close(actual, expected, what: str, rel: float = 1e-12) -> None:
    a = np.asarray(actual, dtype=np.float64)
    e = np.asarray(expected, dtype=np.float64)
    assert a.shape == e.shape, f"{what}: shape {a.shape} != {e.shape}"
    denom = np.maximum(np.abs(e), 1.0)
    worst = float(np.max(np.abs(a - e) / denom)) if a.size else 0.0
    assert worst <= rel, f"{what}: max deviation {worst} > {rel}"


def _raises(exc_type, fn: Callable[[], object], what: str) -> None:
    try:
        fn()
    except exc_type:
        return
    except StyleBalanceError as e:
        raise AssertionError(f"{what}: raised {type(e).__name__} instead of "
                             f"{exc_type.__name__}") from e
    raise AssertionError(f"{what}: expected {exc_type.__name__}, nothing raised")


def _fmap(values, shape, nonneg: bool = False) -> FeatureMap:
    return FeatureMap(np.asarray(values, dtype=np.float64).reshape(shape), nonneg=nonneg)


def _gram_of(values, shape) -> GramMatrix:
    return gram(_fmap(values, shape, nonneg=True))


# ---------------------------------------------------------------------------
# tensors


@fixture("tensors.flatten-orders-pixels-by-row")
def _t_flatten() -> None:
    _arr_eq(flatten_spatial(_fmap([2.0, 3.0], (1, 1, 2))), [[2.0, 3.0]], "1x1x2")
    _arr_eq(flatten_spatial(_fmap([1.0, 0.0, 0.0, 1.0], (2, 1, 2))),
            [[1.0, 0.0], [0.0, 1.0]], "2x1x2")
    _arr_eq(flatten_spatial(_fmap([5.0, 7.0], (1, 2, 1))), [[5.0], [7.0]], "1x2x1")


@fixture("tensors.frobenius-norm")
def _t_frobenius() -> None:
    _eq(frobenius_norm(np.array([[4.0, 6.0], [6.0, 9.0]])), 13.0, "norm of 13-matrix")
    _eq(frobenius_norm(np.array([[3.0], [4.0]])), 5.0, "3-4-5")
    _eq(frobenius_norm(np.zeros((3, 3))), 0.0, "zero matrix")


@fixture("tensors.mse")
def _t_mse() -> None:
    _eq(mse(np.array([1.0, 2.0]), np.array([3.0, 2.0])), 2.0, "mean of [4, 0]")
    _eq(mse(np.array([0.0]), np.array([5.0])), 25.0, "single entry")
    _raises(DimensionError, lambda: mse(np.zeros(2), np.zeros(3)), "length mismatch")


@fixture("tensors.image-and-feature-validation")
def _t_validation() -> None:
    _raises(PreconditionError, lambda: Image(np.full((1, 1, 3), 1.5)), "value above 1")
    _raises(PreconditionError, lambda: Image(np.full((1, 1, 3), -0.1)), "value below 0")
    _raises(DimensionError, lambda: Image(np.zeros((1, 1, 2))), "2-channel image")
    _raises(PreconditionError, lambda: FeatureMap(np.array([[[np.nan]]])), "nan entry")
    Image(np.zeros((2, 2, 1)))
    FeatureMap(np.zeros((2, 2, 5)))


# ---------------------------------------------------------------------------
# losses


@fixture("losses.gram-examples")
def _l_gram() -> None:
    _arr_eq(gram(_fmap([2.0, 3.0], (1, 1, 2))).data, [[4.0, 6.0], [6.0, 9.0]],
            "single-pixel two-channel")
    _arr_eq(gram(_fmap(np.zeros(6), (1, 2, 3))).data, np.zeros((3, 3)), "zero map")
    _arr_eq(gram(_fmap([1.0, 0.0, 0.0, 1.0], (2, 1, 2))).data, np.eye(2),
            "orthonormal columns")
    assert gram(_fmap([1.0, 2.0], (1, 1, 2), nonneg=True)).nonneg, "nonneg propagates"


@fixture("losses.gram-scaling-is-quadratic")
def _l_gram_scale() -> None:
    f = _fmap([0.25, 0.5, 0.125, 0.75], (2, 1, 2))
    scaled = _fmap(np.asarray(f.data) * 2.0, (2, 1, 2))
    _arr_eq(gram(scaled).data, 4.0 * gram(f).data, "gram(2F) = 4 gram(F)")


@fixture("losses.norm-constant-modes")
def _l_norm_constant() -> None:
    f = _fmap(np.zeros(4 * 4 * 8), (4, 4, 8))
    _eq(norm_constant(f, Normalization.SPATIAL_PRODUCT), 16.0, "spatial product")
    _eq(norm_constant(f, Normalization.CHANNELS_SQUARED), 64.0, "channels squared")
    tiny = _fmap([0.0], (1, 1, 1))
    _eq(norm_constant(tiny, Normalization.SPATIAL_PRODUCT), 1.0, "degenerate spatial")
    _eq(norm_constant(tiny, Normalization.CHANNELS_SQUARED), 1.0, "degenerate channels")


@fixture("losses.classic-layer-loss")
def _l_classic() -> None:
    gs = _gram_of([2.0, 3.0], (1, 1, 2))
    zero = _gram_of([0.0, 0.0], (1, 1, 2))
    _eq(classic_layer_loss(gs, gs, 4.0), 0.0, "identical Grams")
    _eq(classic_layer_loss(gs, zero, 4.0), 42.25, "169/4")
    a = _gram_of([1.0, 0.0], (1, 1, 2))
    b = _gram_of([0.0, 1.0], (1, 1, 2))
    _eq(classic_layer_loss(a, b, 1.0), 2.0, "disjoint support")
    _eq(classic_layer_loss(b, a, 1.0), 2.0, "argument symmetry")


@fixture("losses.sup-bound")
def _l_sup() -> None:
    gs = _gram_of([2.0, 3.0], (1, 1, 2))
    zero = _gram_of([0.0, 0.0], (1, 1, 2))
    _eq(sup_bound(gs, zero, 4.0), 42.25, "169/4 against zero")
    _eq(sup_bound(zero, zero, 1.0), 0.0, "both zero")
    a = _gram_of([1.0, 0.0], (1, 1, 2))
    b = _gram_of([0.0, 1.0], (1, 1, 2))
    _eq(sup_bound(a, b, 1.0), 2.0, "disjoint support attains the classic value")
    plain = GramMatrix(np.eye(2))
    _raises(PreconditionError, lambda: sup_bound(plain, b, 1.0), "nonneg flag required")


@fixture("losses.inf-bound")
def _l_inf() -> None:
    gs = _gram_of([2.0, 3.0], (1, 1, 2))
    gp = _gram_of([4.0, 6.0], (1, 1, 2))  # doubled features, so 4x the Gram
    _eq(inf_bound(gs, gp, 1.0), 1521.0, "(13 - 52)^2")
    _eq(classic_layer_loss(gs, gp, 1.0), 1521.0, "parallel Grams attain the bound")
    _eq(inf_bound(gs, gs, 1.0), 0.0, "equal norms")
    zero = _gram_of([0.0, 0.0], (1, 1, 2))
    _eq(inf_bound(gs, zero, 4.0), 42.25, "(13 - 0)^2 / 4")


@fixture("losses.balanced-layer-loss")
def _l_balanced() -> None:
    gs = _gram_of([2.0, 3.0], (1, 1, 2))
    zero = _gram_of([0.0, 0.0], (1, 1, 2))
    _eq(balanced_layer_loss(gs, gs, 4.0), 0.0, "zero numerator")
    _eq(balanced_layer_loss(gs, zero, 4.0), 1.0, "zero opposite Gram")
    _eq(balanced_layer_loss(zero, zero, 4.0), 0.0, "degenerate sup")
    f1 = _fmap([0.3, 0.7, 0.2, 0.9], (2, 1, 2), nonneg=True)
    f2 = _fmap([0.6, 0.1, 0.4, 0.5], (2, 1, 2), nonneg=True)
    base = balanced_layer_loss(gram(f1), gram(f2), 4.0)
    assert 0.0 <= base <= 1.0, f"balanced out of range: {base}"
    s = 7.0
    scaled = balanced_layer_loss(
        gram(FeatureMap(f1.data * s, nonneg=True)),
        gram(FeatureMap(f2.data * s, nonneg=True)), 4.0)
    _close(scaled, base, "joint scaling invariance", rel=1e-12, abs_tol=1e-12)


@fixture("losses.style-total-is-weighted-sum")
def _l_style_total() -> None:
    one = (LayerSpec("b1_r2", 1.0),)
    _eq(style_loss_total(zip(one, [0.3])), 0.3, "single layer")
    two = (LayerSpec("b1_r2", 1.0), LayerSpec("b2_r2", 1.0))
    _close(style_loss_total(zip(two, [0.2, 0.5])), 0.7, "unit weights", rel=1e-15)
    wtwo = (LayerSpec("b1_r2", 2.0), LayerSpec("b2_r2", 0.0))
    _close(style_loss_total(zip(wtwo, [0.2, 0.5])), 0.4, "weighted", rel=1e-15)


@fixture("losses.content-loss")
def _l_content() -> None:
    f = _fmap([0.1, 0.4, 0.9], (1, 1, 3))
    _eq(content_loss(f, f), 0.0, "identical maps")
    _eq(content_loss(_fmap([1.0, 2.0], (1, 1, 2)), _fmap([3.0, 2.0], (1, 1, 2))),
        2.0, "mse oracle")
    zeros = _fmap(np.zeros(4), (2, 2, 1))
    fives = _fmap(np.full(4, 5.0), (2, 2, 1))
    _eq(content_loss(zeros, fives), 25.0, "constant offset")


@fixture("losses.nst-total")
def _l_nst() -> None:
    _eq(nst_total(1.0, 0.0, 10.0), 1.0, "zero style")
    _eq(nst_total(0.0, 2.0, 10.0), 20.0, "zero content")
    _eq(nst_total(1.0, 2.0, 0.5), 2.0, "direct evaluation")


@fixture("losses.batch-aggregate")
def _l_batch() -> None:
    _eq(batch_aggregate([1.0, 3.0], [0.5, 0.5]), 2.0, "mean case")
    _eq(batch_aggregate([1.0, 3.0], [1.0, 0.0]), 1.0, "single-task mask")
    _eq(batch_aggregate([1.0, 2.0, 3.0], [1.0, 1.0, 1.0]), 6.0, "plain sum")
    _raises(DimensionError, lambda: batch_aggregate([1.0], [1.0, 2.0]), "length mismatch")


@fixture("losses.interpolated-target")
def _l_interpolated() -> None:
    gs = _gram_of([1.0, 1.0], (1, 1, 2))
    gc = _gram_of([2.0, 0.0], (1, 1, 2))
    _arr_eq(interpolated_style_target(gs, gc, 1.0).data, gs.data, "endpoint 1")
    _arr_eq(interpolated_style_target(gs, gc, 0.0).data, gc.data, "endpoint 0")
    mid = interpolated_style_target(GramMatrix(np.array([[2.0]]), nonneg=True),
                                    GramMatrix(np.array([[4.0]]), nonneg=True), 0.5)
    _arr_eq(mid.data, [[3.0]], "midpoint")


# ---------------------------------------------------------------------------
# gradients


@fixture("gradients.content-grad")
def _g_content() -> None:
    f = _fmap([0.2, 0.8], (1, 1, 2))
    _arr_eq(content_grad(f, f), np.zeros((1, 1, 2)), "at the minimum")
    g = content_grad(_fmap([1.0], (1, 1, 1)), _fmap([3.0], (1, 1, 1)))
    _arr_eq(g, [[[4.0]]], "2*(3-1)/1")


@fixture("gradients.classic-grad-single-pixel")
def _g_classic() -> None:
    fs = _fmap([1.0], (1, 1, 1), nonneg=True)
    fp = _fmap([2.0], (1, 1, 1), nonneg=True)
    _arr_eq(classic_style_grad(fs, fp, 1.0), [[[24.0]]], "4f(f^2-1) at f=2")
    _arr_eq(classic_style_grad(fs, fs, 1.0), np.zeros((1, 1, 1)), "at the minimum")
    _arr_eq(classic_style_grad(fs, fp, 2.0), [[[12.0]]], "doubling n halves it")


@fixture("gradients.balanced-grad-single-pixel")
def _g_balanced() -> None:
    fs = _fmap([1.0], (1, 1, 1), nonneg=True)
    fp = _fmap([2.0], (1, 1, 1), nonneg=True)
    _arr_eq(balanced_style_grad(fs, fp, 1.0), [[[24.0 / 17.0]]], "classic over sup 17")
    zero = _fmap([0.0], (1, 1, 1), nonneg=True)
    _arr_eq(balanced_style_grad(zero, zero, 1.0), np.zeros((1, 1, 1)), "degenerate sup")


@fixture("gradients.stop-gradient-identity")
def _g_stop_gradient() -> None:
    rng = np.random.default_rng(13)
    for _ in range(10):
        fs = FeatureMap(rng.uniform(0.0, 1.0, (3, 2, 4)), nonneg=True)
        fp = FeatureMap(rng.uniform(0.0, 1.0, (3, 2, 4)), nonneg=True)
        s = sup_bound(gram(fs), gram(fp), 16.0)
        expected = classic_style_grad(fs, fp, 16.0) / s
        got = balanced_style_grad(fs, fp, 16.0)
        denom = np.maximum(np.maximum(np.abs(expected), np.abs(got)), 1e-12)
        worst = float(np.max(np.abs(got - expected) / denom))
        assert worst <= 1e-12, f"stop-gradient identity broke: {worst}"


@fixture("gradients.finite-diff-on-quadratic")
def _g_fd_quadratic() -> None:
    err = finite_diff_check(lambda x: float(x[0] ** 2), np.array([3.0]),
                            np.array([6.0]), eps=1e-5)
    assert err <= 1e-9, f"quadratic slope mismatch: {err}"


@fixture("gradients.finite-diff-detects-wrong-grad")
def _g_fd_detector() -> None:
    err = finite_diff_check(lambda x: float(x[0] ** 2), np.array([3.0]), np.array([12.0]))
    _close(err, 0.5, "doubled analytic slope", rel=1e-6)
    err = finite_diff_check(lambda x: float(x[0] ** 2), np.array([3.0]), np.array([0.0]))
    assert err >= 0.99, f"zero analytic slope should read as ~1, got {err}"


@fixture("gradients.finite-diff-on-classic-grad")
def _g_fd_classic() -> None:
    rng = np.random.default_rng(0)
    fs = FeatureMap(rng.uniform(0.0, 1.0, (2, 2, 3)), nonneg=True)
    fp = FeatureMap(rng.uniform(0.0, 1.0, (2, 2, 3)), nonneg=True)
    target = gram(fs)
    analytic = classic_style_grad(fs, fp, 9.0)
    err = finite_diff_check(
        lambda x: classic_layer_loss(target, gram(FeatureMap(x.reshape(2, 2, 3))), 9.0),
        fp.data, analytic)
    assert err <= 1e-6, f"classic grad vs central differences: {err}"


# ---------------------------------------------------------------------------
# feature extractor


@fixture("featnet.deterministic-build")
def _f_deterministic() -> None:
    a = build(default_config(seed=0))
    b = build(default_config(seed=0))
    _eq(sorted(a.params), sorted(b.params), "same conv layer set")
    for idx in a.params:
        _arr_eq(a.params[idx][0], b.params[idx][0], f"weights of layer {idx}")
    _eq(a.parameter_count(), 119784, "parameter count of the stock net")
    c = build(default_config(seed=1))
    assert any(not np.array_equal(a.params[i][0], c.params[i][0]) for i in a.params), \
        "different seeds must give different weights"


@fixture("featnet.zero-biases")
def _f_zero_biases() -> None:
    net = build(default_config(seed=0))
    for idx, (_, b) in net.params.items():
        _arr_eq(b, np.zeros_like(b), f"bias of layer {idx}")


@fixture("featnet.default-taps-present")
def _f_taps() -> None:
    net = build(default_config(seed=0))
    for tap in ("b1_r2", "b2_r2", "b3_r3", "b4_r3"):
        assert tap in net.taps, f"missing tap {tap}"
    _raises(ConfigError, lambda: net.tap_index("b9_r9"), "unknown tap")


@fixture("featnet.zero-image-zero-features")
def _f_zero_image() -> None:
    net = build(default_config(seed=0))
    feats = forward(net, Image(np.zeros((8, 8, 3))))
    for tap, f in feats.items():
        _arr_eq(f.data, np.zeros_like(f.data), f"features at {tap}")


def _passthrough_net(weight: float) -> FeatNet:
    layers = (Conv(1, 1, 1), Relu("out"))
    w = np.full((1, 1, 1, 1), weight)
    return FeatNet(layers, {0: (w, np.zeros(1))})


@fixture("featnet.unit-conv-passthrough")
def _f_passthrough() -> None:
    net = _passthrough_net(1.0)
    feats = forward(net, Image(np.array([[[0.5]]])), ["out"])
    _arr_eq(feats["out"].data, [[[0.5]]], "identity convolution")
    assert feats["out"].nonneg, "tapped features carry the nonneg flag"


@fixture("featnet.relu-clamps-negative-preactivation")
def _f_relu_clamp() -> None:
    net = _passthrough_net(-1.0)
    feats = forward(net, Image(np.array([[[0.2]]])), ["out"])
    _arr_eq(feats["out"].data, [[[0.0]]], "negated pixel clamps to zero")


@fixture("featnet.positive-homogeneity")
def _f_homogeneity() -> None:
    net = build(default_config(seed=2))
    img = noise_image(4, size=8)
    half = Image(img.data * 0.5)
    full = forward(net, img)
    scaled = forward(net, half)
    for tap in full:
        _arr_close(scaled[tap].data, 0.5 * full[tap].data, f"halved input at {tap}",
                   rel=1e-12)


@fixture("featnet.cache-replay-and-accounting")
def _f_cache() -> None:
    net = build(default_config(seed=0))
    img = noise_image(9, size=8)
    plain = forward(net, img)
    feats, cache = forward_with_cache(net, img)
    for tap in plain:
        _arr_eq(feats[tap].data, plain[tap].data, f"cache replay at {tap}")
    h = w = 8
    c = 3
    expected = 0
    for idx in range(cache.last + 1):
        layer = net.layers[idx]
        expected += h * w * c
        if isinstance(layer, Conv):
            c = layer.out_ch
        elif isinstance(layer, AvgPool):
            h //= 2
            w //= 2
    _eq(cache.element_count(), expected, "activation accounting")


@fixture("featnet.weights-file-roundtrip")
def _f_weights_roundtrip() -> None:
    cfg = default_config(seed=5)
    net = build(cfg)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "net.fnw"
        fileio.write_weights(net, path)
        loaded = fileio.read_weights(path, cfg)
        for idx in net.params:
            _arr_eq(loaded.params[idx][0], net.params[idx][0], f"weights {idx}")
            _arr_eq(loaded.params[idx][1], net.params[idx][1], f"biases {idx}")


# ---------------------------------------------------------------------------
# stylizer


@fixture("stylizer.zero-steps-returns-content")
def _s_zero_steps() -> None:
    net = build(default_config(seed=0))
    content = noise_image(21, size=8)
    style = noise_image(22, size=8)
    pastiche, trajectory = stylize(net, content, style, OptimizeConfig(steps=0))
    _arr_eq(pastiche.data, content.data, "unmodified pixels")
    _eq(len(trajectory), 1, "trajectory has only the initial point")


@fixture("stylizer.self-style-is-a-fixed-point")
def _s_fixed_point() -> None:
    net = build(default_config(seed=0))
    content = noise_image(23, size=8)
    pastiche, trajectory = stylize(net, content, content, OptimizeConfig(steps=5))
    _arr_eq(pastiche.data, content.data, "gradient-free point stays put")
    _arr_eq(np.asarray(trajectory), np.zeros(6), "loss is identically zero")


@fixture("stylizer.loss-descends")
def _s_descends() -> None:
    net = build(default_config(seed=0))
    content = noise_image(31, size=16)
    style = texture_set(32, 1, size=16)[0]
    _, trajectory = stylize(net, content, style, OptimizeConfig(steps=200))
    assert trajectory[-1] < trajectory[0], \
        f"no descent: {trajectory[0]} -> {trajectory[-1]}"


@fixture("stylizer.noise-init-is-seeded")
def _s_noise_init() -> None:
    net = build(default_config(seed=0))
    content = noise_image(41, size=8)
    style = noise_image(42, size=8)
    cfg = OptimizeConfig(steps=0, init=InitKind.NOISE, seed=77)
    a, _ = stylize(net, content, style, cfg)
    b, _ = stylize(net, content, style, cfg)
    _arr_eq(a.data, b.data, "same seed, same start")
    assert float(np.min(a.data)) >= 0.0 and float(np.max(a.data)) <= 1.0, \
        "noise init must stay in pixel range"
    assert not np.array_equal(a.data, content.data), "noise init differs from content"


@fixture("stylizer.sweep-single-task-matches-stylize")
def _s_sweep_single() -> None:
    net = build(default_config(seed=0))
    content = noise_image(51, size=8)
    style = texture_set(52, 1, size=8)[0]
    cfg = OptimizeConfig(steps=8)
    pastiche, _ = stylize(net, content, style, cfg)
    result = sweep(net, [content], [style], cfg, keep_pastiches=True)
    _eq(len(result.rows), 1, "one task")
    _arr_eq(result.pastiches[0].data, pastiche.data, "identical pastiche")
    report = evaluate_pair(net, content, style, pastiche)
    _close(result.rows[0].classic_style, report.classic_style, "classic total", rel=1e-12)
    _close(result.rows[0].balanced_style, report.balanced_style, "balanced total", rel=1e-12)


@fixture("stylizer.sweep-pairs-and-ids")
def _s_sweep_pairs() -> None:
    net = build(default_config(seed=0))
    contents = [noise_image(61, size=8), noise_image(62, size=8)]
    styles = texture_set(63, 3, size=8)
    result = sweep(net, contents, styles, OptimizeConfig(steps=2))
    _eq(len(result.rows), 6, "cartesian task count")
    _eq({r.content_id for r in result.rows}, {"c0", "c1"}, "content ids")
    _eq({r.style_id for r in result.rows}, {"s0", "s1", "s2"}, "style ids")
    for row in result.rows:
        assert row.balanced_style >= 0.0, "balanced total must be non-negative"
    _raises(PreconditionError, lambda: sweep(net, [], styles), "empty contents")
    _raises(DimensionError,
            lambda: sweep(net, contents, styles, OptimizeConfig(steps=1), pairing="zip"),
            "zip with unequal counts")


@fixture("stylizer.interpolation-endpoint-matches-plain-run")
def _s_interp_endpoint() -> None:
    net = build(default_config(seed=0))
    content = noise_image(71, size=8)
    style = texture_set(72, 1, size=8)[0]
    cfg = OptimizeConfig(steps=6)
    plain, _ = stylize(net, content, style, cfg)
    via_alpha, _ = interpolation_baseline(net, content, style, 1.0, cfg)
    _arr_eq(via_alpha.data, plain.data, "alpha=1 is plain stylization")
    _raises(PreconditionError,
            lambda: interpolation_baseline(net, content, style, 1.5, cfg),
            "alpha out of range")


@fixture("stylizer.interpolation-trend-is-monotone")
def _s_interp_trend() -> None:
    net = build(default_config(seed=0))
    content = noise_image(81, size=16)
    style = texture_set(82, 1, size=16)[0]
    cfg = OptimizeConfig(steps=60)
    finals = []
    for alpha in (0.0, 0.5, 1.0):
        pastiche, _ = interpolation_baseline(net, content, style, alpha, cfg)
        finals.append(evaluate_pair(net, content, style, pastiche).classic_style)
    assert finals[0] > finals[1] > finals[2], \
        f"distance to the true style should fall with alpha: {finals}"


@fixture("stylizer.auto-beta-matches-initial-ratio")
def _s_auto_beta() -> None:
    net = build(default_config(seed=0))
    content = noise_image(91, size=8)
    style = texture_set(92, 1, size=8)[0]
    cfg = OptimizeConfig(steps=0, init=InitKind.NOISE, seed=3, auto_beta=True)
    seen = []
    stylize(net, content, style, cfg, on_step=lambda step, x, rep: seen.append(rep))
    probe_cfg = OptimizeConfig(steps=0, init=InitKind.NOISE, seed=3)
    start, _ = stylize(net, content, style, probe_cfg)
    report = evaluate_pair(net, content, style, start)
    _close(seen[-1].beta, report.content / report.classic_style, "calibrated beta",
           rel=1e-12)


# ---------------------------------------------------------------------------
# analysis


@fixture("analysis.pearson")
def _a_pearson() -> None:
    _eq(pearson([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]), 1.0, "exact linear")
    _eq(pearson([1.0, 2.0, 3.0], [6.0, 4.0, 2.0]), -1.0, "exact anti-linear")
    _close(pearson([1.0, 2.0, 3.0], [1.0, 1.0, 2.0]), math.sqrt(3.0) / 2.0,
           "hand computation", rel=1e-4)
    _raises(PreconditionError, lambda: pearson([1.0, 2.0], [5.0, 5.0]), "constant side")
    _raises(PreconditionError, lambda: pearson([1.0], [2.0]), "too short")
    x = [0.2, 0.9, 0.4, 0.7]
    y = [1.0, 3.0, 2.0, 0.5]
    _close(pearson(x, y), pearson([3.0 * v + 1.0 for v in x], y),
           "positive affine invariance", rel=1e-12)


@fixture("analysis.histogram")
def _a_histogram() -> None:
    h = histogram([0.0, 0.5, 1.0], 2, 0.0, 1.0)
    _eq(h.counts, (1, 2), "right-closed last bin")
    _eq((h.underflow, h.overflow), (0, 0), "no out-of-range values")
    empty = histogram([], 3, 0.0, 1.0)
    _eq(empty.counts, (0, 0, 0), "empty input")
    outside = histogram([-1.0, 2.0], 2, 0.0, 1.0)
    _eq(outside.counts, (0, 0), "nothing in range")
    _eq((outside.underflow, outside.overflow), (1, 1), "overflow accounting")
    _eq(sum(h.counts) + h.underflow + h.overflow, 3, "total count conservation")


@fixture("analysis.linear-fit")
def _a_linear_fit() -> None:
    x = [0.0, 1.0, 2.0, 3.0]
    slope, intercept, r = linear_fit(x, [2.0 * v + 1.0 for v in x])
    _close(slope, 2.0, "slope", rel=1e-12)
    _close(intercept, 1.0, "intercept", rel=1e-12)
    _eq(r, 1.0, "perfect fit")
    _raises(PreconditionError, lambda: linear_fit(x, [4.0] * 4), "constant response")


def _bank(rows) -> FeatureBank:
    ids = tuple(r[0] for r in rows)
    artists = tuple(r[1] for r in rows)
    vectors = np.asarray([r[2] for r in rows], dtype=np.float64)
    return FeatureBank(ids, artists, vectors)


@fixture("analysis.deception-rate")
def _a_deception() -> None:
    styles = _bank([("sa", "A", [0.0, 0.0]), ("sb", "B", [10.0, 10.0])])
    _eq(deception_rate(_bank([("p0", "A", [1.0, 1.0])]), styles), 1.0,
        "separated clusters")
    _eq(deception_rate(_bank([("p0", "A", [9.0, 9.0])]), styles), 0.0, "wrong cluster")
    mixed = _bank([
        ("p0", "A", [1.0, 1.0]),
        ("p1", "A", [9.0, 9.0]),
        ("p2", "B", [8.0, 8.0]),
        ("p3", "B", [2.0, 2.0]),
    ])
    _eq(deception_rate(mixed, styles), 0.5, "two of four correct")
    _raises(DimensionError,
            lambda: deception_rate(_bank([("p", "A", [1.0, 2.0, 3.0])]), styles),
            "dimension mismatch")


@fixture("analysis.deception-ties-take-lowest-id")
def _a_deception_ties() -> None:
    styles = _bank([("a", "A", [0.0, 0.0]), ("b", "B", [2.0, 0.0])])
    probe = _bank([("p0", "A", [1.0, 0.0])])
    _eq(deception_rate(probe, styles), 1.0, "tie resolves to id 'a'")
    renamed = _bank([("z", "A", [0.0, 0.0]), ("b", "B", [2.0, 0.0])])
    _eq(deception_rate(probe, renamed), 0.0, "tie resolves to id 'b' after renaming")


@fixture("analysis.correlation-report")
def _a_correlation() -> None:
    n = 60
    losses = [0.01 * i for i in range(n)]
    table = LossTable(tuple(f"s{i:03d}" for i in range(n)), ("total",),
                      np.asarray(losses).reshape(n, 1))
    aligned = [AnnotationRecord(f"s{i:03d}", -1 if i < n // 3 else (0 if i < 2 * n // 3 else 1))
               for i in range(n)]
    result = correlation_report(table, aligned)
    assert result["total"] > 0.9, f"rank-aligned annotations should correlate: {result}"
    missing = [AnnotationRecord("zz", 1)] + aligned[1:]
    _raises(DataError, lambda: correlation_report(table, missing), "unmatched ids")


@fixture("analysis.mc-bounds-two-point")
def _a_mc_two_point() -> None:
    spec = MomentSpec.discrete([1.0, 3.0])
    _eq((spec.mu, spec.sigma), (2.0, 1.0), "two-point moments")
    lower, upper = expectation_bounds(spec, spec)
    _eq((lower, upper), (2.0, 10.0), "bound pair")
    result = mc_expectation_bounds(spec, spec, trials=20000, seed=5)
    assert result.within, "containment with 3-standard-error slack"
    assert abs(result.estimate - 2.0) <= 4.0 * result.stderr, \
        f"estimate {result.estimate} too far from 2.0"


@fixture("analysis.mc-bounds-degenerate-and-point")
def _a_mc_degenerate() -> None:
    c = 1.5
    point = MomentSpec.point(c)
    result = mc_expectation_bounds(point, point, trials=1000, seed=0)
    _eq(result.estimate, 0.0, "identical point masses")
    _eq((result.lower, result.upper), (0.0, 2.0 * c * c), "degenerate bounds")
    assert result.within, "zero estimate sits on the lower bound"
    r14 = mc_expectation_bounds(MomentSpec.point(1.0), MomentSpec.point(4.0),
                                trials=1000, seed=0)
    _eq(r14.estimate, 9.0, "deterministic distance")
    _eq((r14.lower, r14.upper), (9.0, 17.0), "tight lower bound")
    assert r14.within, "containment"
    _raises(PreconditionError, lambda: MomentSpec.discrete([-1.0, 2.0]),
            "negative support")


@fixture("analysis.relaxed-bounds")
def _a_relaxed() -> None:
    a = MomentSpec.uniform(0.0, 4.0)
    _eq(relaxed_bounds(a, a, 2.0)[0], 0.0, "equal means")
    two = MomentSpec.point(2.0)
    _eq(relaxed_bounds(two, two, 2.5)[1], 20.0, "k (4 + 4)")
    rng = np.random.default_rng(8)
    for _ in range(20):
        s1 = MomentSpec.uniform(rng.uniform(0, 2), 2.0 + rng.uniform(0.1, 3))
        s2 = MomentSpec.discrete(rng.uniform(0, 5, size=3))
        assert relaxed_bounds(s1, s2, 1.0)[0] <= expectation_bounds(s1, s2)[0] + 1e-15, \
            "variance-free lower bound must not exceed the full lower bound"


# ---------------------------------------------------------------------------
# file formats


@fixture("fileio.pixmap-roundtrip-quantization")
def _io_ppm_roundtrip() -> None:
    rng = np.random.default_rng(12)
    img = Image(rng.uniform(0.0, 1.0, (5, 4, 3)))
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "img.ppm"
        fileio.write_image(img, path)
        back = fileio.read_image(path)
        worst = float(np.max(np.abs(back.data - img.data)))
        assert worst <= 1.0 / 510.0 + 1e-12, f"quantization error {worst} > 1/510"
        fileio.write_image(back, Path(tmp) / "img2.ppm")
        _eq((Path(tmp) / "img.ppm").read_bytes(), (Path(tmp) / "img2.ppm").read_bytes(),
            "requantization is idempotent")


@fixture("fileio.pixmap-header-layout")
def _io_ppm_header() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "tiny.ppm"
        path.write_bytes(b"P6 2 1 255 " + bytes([255, 0, 0, 0, 0, 0]))
        img = fileio.read_image(path)
        _eq((img.height, img.width, img.channels), (1, 2, 3), "dimensions")
        _arr_eq(img.data, [[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]], "pixel values")
        gray = Path(tmp) / "tiny.pgm"
        gray.write_bytes(b"P5 1 2 255 " + bytes([0, 255]))
        gimg = fileio.read_image(gray)
        _arr_eq(gimg.data, [[[0.0]], [[1.0]]], "single-channel values")


@fixture("fileio.pixmap-rejects-bad-input")
def _io_ppm_errors() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        bad_maxval = Path(tmp) / "a.ppm"
        bad_maxval.write_bytes(b"P6 1 1 65535 " + bytes([0] * 6))
        _raises(DataError, lambda: fileio.read_image(bad_maxval), "wide maxval")
        truncated = Path(tmp) / "b.ppm"
        truncated.write_bytes(b"P6 2 2 255 " + bytes([1, 2, 3]))
        try:
            fileio.read_image(truncated)
            raise AssertionError("truncated payload must not parse")
        except DataError as e:
            assert "byte" in str(e), f"message should carry a byte offset: {e}"


@fixture("fileio.weights-rejects-foreign-files")
def _io_weights_errors() -> None:
    cfg = default_config(seed=0)
    net = build(cfg)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "net.fnw"
        fileio.write_weights(net, path)
        blob = bytearray(path.read_bytes())
        blob[3] = ord("2")
        wrong_magic = Path(tmp) / "bad.fnw"
        wrong_magic.write_bytes(bytes(blob))
        _raises(DataError, lambda: fileio.read_weights(wrong_magic, cfg), "magic")
        other = default_config(seed=0, in_channels=1)
        try:
            fileio.read_weights(path, other)
            raise AssertionError("dim mismatch must not load")
        except DataError as e:
            assert "layer 0" in str(e), f"message should name the layer: {e}"


@fixture("fileio.report-csv-roundtrip")
def _io_report() -> None:
    rows = [
        fileio.ReportRow("c0", "s0", "b1_r2", 1.0 / 3.0, 0.1, 1e-17, 0.25),
        fileio.ReportRow("c0", "s0", "total", 2.0 / 7.0, 5.5, 0.0, 0.125),
    ]
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "report.csv"
        fileio.write_report_csv(path, rows)
        back = fileio.read_report_csv(path)
        _eq(back, rows, "bit-identical report rows")


@fixture("fileio.annotation-csv")
def _io_annotations() -> None:
    records = [AnnotationRecord("x1", -1), AnnotationRecord("x2", 0),
               AnnotationRecord("x3", 1)]
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "ann.csv"
        fileio.write_annotations(path, records)
        _eq(fileio.read_annotations(path), records, "round trip")
        bad = Path(tmp) / "bad.csv"
        bad.write_text("id,score\nx1,-1\nx2,2\n", encoding="utf-8")
        try:
            fileio.read_annotations(bad)
            raise AssertionError("score 2 must not parse")
        except DataError as e:
            assert "line 3" in str(e), f"message should carry the line: {e}"


@fixture("fileio.feature-bank-csv")
def _io_feature_bank() -> None:
    bank = _bank([("i0", "A", [0.5, 1.0]), ("i1", "B", [2.0, 3.5])])
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "bank.csv"
        fileio.write_feature_bank(path, bank)
        back = fileio.read_feature_bank(path)
        _eq(back.ids, bank.ids, "ids")
        _eq(back.artists, bank.artists, "artists")
        _arr_eq(back.vectors, bank.vectors, "vectors")
        ragged = Path(tmp) / "ragged.csv"
        ragged.write_text("id,artist,v0,v1\na,A,1.0,2.0\nb,B,3.0\n", encoding="utf-8")
        _raises(DataError, lambda: fileio.read_feature_bank(ragged), "ragged row")


@fixture("fileio.run-config-rejects-unknown-keys")
def _io_run_config() -> None:
    fileio.run_config_from_dict({})
    _raises(DataError, lambda: fileio.run_config_from_dict({"optimise": {}}),
            "misspelled section")
    _raises(DataError,
            lambda: fileio.run_config_from_dict({"optimize": {"stepz": 3}}),
            "misspelled option")
    _raises(ConfigError,
            lambda: fileio.run_config_from_dict(
                {"loss": {"style_layers": [["b7_r9", 1.0]]}}),
            "tap absent from the architecture")
    cfg = fileio.run_config_from_dict(
        {"net": {"seed": 9}, "optimize": {"steps": 3, "loss_kind": "balanced"}})
    _eq(cfg.net.seed, 9, "net seed")
    _eq(cfg.optimize.steps, 3, "steps")
    _eq(cfg.optimize.loss_kind, LossKind.BALANCED, "loss kind")


@fixture("scoring.self-pair-is-all-zero")
def _sc_self_pair() -> None:
    net = build(default_config(seed=0))
    img = noise_image(99, size=8)
    report = evaluate_pair(net, img, img, img)
    _eq(report.content, 0.0, "content term")
    _eq(report.classic_style, 0.0, "classic total")
    _eq(report.balanced_style, 0.0, "balanced total")
    _eq(report.total, 0.0, "combined objective")


@fixture("scoring.report-rows-carry-weighted-totals")
def _sc_report_rows() -> None:
    net = build(default_config(seed=0))
    content = noise_image(101, size=8)
    style = texture_set(102, 1, size=8)[0]
    report = evaluate_pair(net, content, style, content)
    cfg = LossConfig()
    rows = fileio.report_rows("c", "s", report, cfg)
    _eq(len(rows), len(report.layers) + 1, "per-tap rows plus totals")
    total = rows[-1]
    _eq(total.tap, "total", "totals row tag")
    _close(total.classic, sum(r.classic for r in report.layers), "weighted classic",
           rel=1e-12)
    assert total.inf <= total.classic <= total.sup + 1e-9 * total.sup, \
        "totals row keeps the bracket"


# ---------------------------------------------------------------------------
# runner and artifacts


@dataclass(frozen=True)
class FixtureResult:
    name: str
    ok: bool
    message: str = ""


def run(names: list[str] | None = None) -> list[FixtureResult]:
    """Execute the registered fixtures (all of them by default) in order."""
    wanted = set(names) if names is not None else None
    results = []
    for name, fn in FIXTURES:
        if wanted is not None and name not in wanted:
            continue
        try:
            fn()
        except AssertionError as e:
            results.append(FixtureResult(name, False, str(e)))
        except StyleBalanceError as e:
            results.append(FixtureResult(name, False,
                                         f"unexpected {type(e).__name__}: {e}"))
        else:
            results.append(FixtureResult(name, True))
    return results


def write_artifacts(out_dir) -> list[str]:
    """Produce the deterministic artifact set used for byte-level comparison.

    Runs a tiny two-style sweep at 16x16 with fixed seeds and writes the
    sweep table, a per-tap report for the first task, and its pastiche.
    Returns the artifact file names.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with single_thread():
        net = build(default_config(seed=0))
        content = noise_image(5, size=16)
        styles = texture_set(3, 2, size=16)
        cfg = OptimizeConfig(steps=25, seed=0)
        result = sweep(net, [content], styles, cfg, keep_pastiches=True,
                       content_ids=["content0"], style_ids=["tex0", "tex1"])
        fileio.write_sweep_csv(out / "selftest_sweep.csv", result)
        report = evaluate_pair(net, content, styles[0], result.pastiches[0])
        rows = fileio.report_rows("content0", "tex0", report, cfg.loss)
        fileio.write_report_csv(out / "selftest_report.csv", rows)
        fileio.write_image(result.pastiches[0], out / "selftest_pastiche.ppm")
    return ["selftest_sweep.csv", "selftest_report.csv", "selftest_pastiche.ppm"]
