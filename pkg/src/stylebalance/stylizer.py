"""Pixel-space stylization by direct gradient descent with Adam.

The pastiche starts from the content image or seeded noise and is updated
for a fixed number of steps; every step evaluates the combined objective
content + beta * style at the configured taps, backpropagates the analytic
layer gradients to the pixels, applies one Adam update, and clamps to
[0, 1]. All randomness derives from the config seed through splitmix64, and
the whole loop runs under a single-thread BLAS guard, so a given (network,
images, config) always reproduces the same pastiche bit for bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .exceptions import DimensionError, PreconditionError
from .featnet import FeatNet, _run_forward, backward_from_cache, forward
from .gradients import content_grad, style_grad_to_target
from .losses import (GramMatrix, LossConfig, gram, interpolated_style_target,
                     norm_constant, sup_bound)
from .losses import content_loss as _content_loss
from .scoring import (LossKind, PairReport, assemble_report, reports_against_targets,
                      style_targets)
from .tensors import FeatureMap, Image
from .util import single_thread, stream_key, unit_floats
from .validation import check_count, check_positive

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class InitKind(str, enum.Enum):
    CONTENT = "content"
    NOISE = "noise"


@dataclass(frozen=True)
class OptimizeConfig:
    """Optimization hyperparameters; loss selection lives in ``loss``.

    ``auto_beta`` rescales beta once, at the initial point, so that the
    style term starts with the same magnitude as the content term (it is a
    no-op when either initial term is zero).
    """

    steps: int = 200
    step_size: float = 0.02
    seed: int = 0
    init: InitKind = InitKind.CONTENT
    loss_kind: LossKind = LossKind.CLASSIC
    loss: LossConfig = field(default_factory=LossConfig)
    auto_beta: bool = False

    def __post_init__(self):
        check_count(self.steps, "steps")
        check_positive(self.step_size, "step_size")
        object.__setattr__(self, "init", InitKind(self.init))
        object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))


@dataclass(frozen=True)
class SweepRow:
    """Final measurements of one sweep task."""

    style_id: str
    content_id: str
    classic_style: float
    balanced_style: float
    content: float
    steps: int


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    pastiches: tuple[Image, ...] | None = None


StepCallback = Callable[[int, np.ndarray, PairReport], None]


def _noise_pixels(shape, seed: int) -> np.ndarray:
    key = stream_key(seed, 0xA11CE)
    return unit_floats(key, int(np.prod(shape))).reshape(shape)


def _init_pixels(content: Image, cfg: OptimizeConfig) -> np.ndarray:
    if cfg.init is InitKind.NOISE:
        return _noise_pixels(content.data.shape, cfg.seed)
    return content.data.copy()


def _evaluate(net: FeatNet, x: np.ndarray, content_ref: FeatureMap,
              targets: dict[str, GramMatrix], cfg: OptimizeConfig,
              beta: float, want_grads: bool):
    """One objective evaluation at pixel array ``x``.

    Returns (report, pixel_gradient_or_None). The balanced branch freezes
    each layer's sup denominator at the current point before weighting.
    """
    loss_cfg = cfg.loss
    style_taps = [spec.tap for spec in loss_cfg.style_layers]
    taps = sorted(set(style_taps) | {loss_cfg.content_layer})
    feats, cache = _run_forward(net, Image(x), taps, keep_cache=want_grads)
    layers = reports_against_targets(targets, feats, loss_cfg)
    c_val = _content_loss(content_ref, feats[loss_cfg.content_layer])
    report = assemble_report(c_val, layers, loss_cfg, cfg.loss_kind, beta)
    if not want_grads:
        return report, None
    layer_grads = [(loss_cfg.content_layer,
                    content_grad(content_ref, feats[loss_cfg.content_layer]))]
    for spec in loss_cfg.style_layers:
        fp = feats[spec.tap]
        n = norm_constant(fp, loss_cfg.normalization)
        g = style_grad_to_target(targets[spec.tap], fp, n)
        if cfg.loss_kind is LossKind.BALANCED:
            s = sup_bound(targets[spec.tap], gram(fp), n)
            g = np.zeros_like(g) if s == 0.0 else g / s
        layer_grads.append((spec.tap, beta * spec.weight * g))
    injected: dict[int, np.ndarray] = {}
    for tap, g in layer_grads:
        idx = net.tap_index(tap)
        injected[idx] = injected[idx] + g if idx in injected else g
    pixel_grad = backward_from_cache(net, cache, injected)
    return report, pixel_grad


def _optimize(net: FeatNet, content: Image, targets: dict[str, GramMatrix],
              cfg: OptimizeConfig, on_step: StepCallback | None):
    content_ref = forward(net, content, [cfg.loss.content_layer])[cfg.loss.content_layer]
    with single_thread():
        x = _init_pixels(content, cfg)
        beta = cfg.loss.beta
        if cfg.auto_beta:
            probe, _ = _evaluate(net, x, content_ref, targets, cfg, beta, want_grads=False)
            if probe.content > 0.0 and probe.style > 0.0:
                beta = probe.content / probe.style
        m = np.zeros_like(x)
        v = np.zeros_like(x)
        trajectory: list[float] = []
        for step in range(cfg.steps):
            report, g = _evaluate(net, x, content_ref, targets, cfg, beta, want_grads=True)
            trajectory.append(report.total)
            if on_step is not None:
                on_step(step, x, report)
            m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
            v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * (g * g)
            t = step + 1
            m_hat = m / (1.0 - ADAM_BETA1 ** t)
            v_hat = v / (1.0 - ADAM_BETA2 ** t)
            x = np.clip(x - cfg.step_size * m_hat / (np.sqrt(v_hat) + ADAM_EPS), 0.0, 1.0)
        report, _ = _evaluate(net, x, content_ref, targets, cfg, beta, want_grads=False)
        trajectory.append(report.total)
        if on_step is not None:
            on_step(cfg.steps, x, report)
    return Image(x), trajectory, report


def stylize(net: FeatNet, content: Image, style: Image, cfg: OptimizeConfig | None = None,
            on_step: StepCallback | None = None) -> tuple[Image, list[float]]:
    """Optimize a pastiche of ``content`` toward the Gram statistics of ``style``.

    Returns the final image and the trajectory of total losses: entry 0 is
    the objective at the initial point, entry i the objective after i
    updates, so the last entry describes the returned pastiche.
    """
    cfg = cfg if cfg is not None else OptimizeConfig()
    style_feats = forward(net, style, [s.tap for s in cfg.loss.style_layers])
    targets = style_targets(style_feats, cfg.loss)
    pastiche, trajectory, _ = _optimize(net, content, targets, cfg, on_step)
    return pastiche, trajectory


def interpolation_baseline(net: FeatNet, content: Image, style: Image, alpha: float,
                           cfg: OptimizeConfig | None = None,
                           on_step: StepCallback | None = None) -> tuple[Image, list[float]]:
    """Stylize toward per-layer targets alpha * G_style + (1 - alpha) * G_content.

    With alpha = 0 the style term pulls toward the content's own statistics;
    alpha = 1 recovers plain stylization. Requires alpha in [0, 1].
    """
    a = float(alpha)
    if not 0.0 <= a <= 1.0:
        raise PreconditionError(f"alpha must lie in [0, 1], got {alpha!r}")
    cfg = cfg if cfg is not None else OptimizeConfig()
    style_taps = [s.tap for s in cfg.loss.style_layers]
    style_feats = forward(net, style, style_taps)
    content_feats = forward(net, content, style_taps)
    targets = {
        tap: interpolated_style_target(gram(style_feats[tap]), gram(content_feats[tap]), a)
        for tap in style_taps
    }
    pastiche, trajectory, _ = _optimize(net, content, targets, cfg, on_step)
    return pastiche, trajectory


def task_seed(seed: int, task_index: int) -> int:
    """Per-task PRNG stream key so task results are scheduling-independent."""
    return stream_key(seed, task_index)


def sweep(net: FeatNet, contents: Sequence[Image], styles: Sequence[Image],
          cfg: OptimizeConfig | None = None, pairing: str = "pairs",
          content_ids: Sequence[str] | None = None,
          style_ids: Sequence[str] | None = None,
          keep_pastiches: bool = False,
          on_step: Callable[[int, int, PairReport], None] | None = None) -> SweepResult:
    """Run stylization over content/style combinations and collect finals.

    ``pairing`` is "pairs" (full cartesian product) or "zip" (elementwise,
    requiring equal counts). Each task runs with a seed derived from
    (cfg.seed, task index). ``on_step`` receives (task index, step, report)
    at the same cadence as the per-task trajectory.
    """
    cfg = cfg if cfg is not None else OptimizeConfig()
    if pairing not in ("pairs", "zip"):
        raise PreconditionError(f"pairing must be 'pairs' or 'zip', got {pairing!r}")
    if not contents or not styles:
        raise PreconditionError("sweep needs at least one content and one style image")
    content_ids = list(content_ids) if content_ids is not None else [
        f"c{i}" for i in range(len(contents))]
    style_ids = list(style_ids) if style_ids is not None else [
        f"s{i}" for i in range(len(styles))]
    if len(content_ids) != len(contents) or len(style_ids) != len(styles):
        raise DimensionError("id lists must match the image lists in length")
    if pairing == "zip":
        if len(contents) != len(styles):
            raise DimensionError(
                f"zip pairing needs equal counts, got {len(contents)} contents "
                f"and {len(styles)} styles")
        tasks = list(zip(range(len(contents)), range(len(styles))))
    else:
        tasks = [(ci, si) for ci in range(len(contents)) for si in range(len(styles))]
    rows = []
    pastiches = []
    for t, (ci, si) in enumerate(tasks):
        task_cfg = replace(cfg, seed=task_seed(cfg.seed, t))
        hook = (lambda step, x, rep, _t=t: on_step(_t, step, rep)) if on_step else None
        style_feats = forward(net, styles[si], [s.tap for s in task_cfg.loss.style_layers])
        targets = style_targets(style_feats, task_cfg.loss)
        pastiche, _, final = _optimize(net, contents[ci], targets, task_cfg, hook)
        rows.append(SweepRow(
            style_id=style_ids[si],
            content_id=content_ids[ci],
            classic_style=final.classic_style,
            balanced_style=final.balanced_style,
            content=final.content,
            steps=cfg.steps,
        ))
        if keep_pastiches:
            pastiches.append(pastiche)
    return SweepResult(tuple(rows), tuple(pastiches) if keep_pastiches else None)
