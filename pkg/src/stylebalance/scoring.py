"""Scoring a (content, style, pastiche) triple against a network.

Produces per-tap LayerLossReport rows plus weighted totals, for both the
classic and the balanced style metric. The optimizer and the `loss` CLI
subcommand share this path so their numbers agree exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

from .exceptions import DimensionError
from .featnet import FeatNet, forward
from .losses import (GramMatrix, LayerLossReport, LossConfig, gram, layer_report,
                     norm_constant, style_loss_total)
from .losses import content_loss as _content_loss
from .tensors import FeatureMap, Image


class LossKind(str, enum.Enum):
    """Which style metric drives an objective: raw classic or balanced."""

    CLASSIC = "classic"
    BALANCED = "balanced"


@dataclass(frozen=True)
class PairReport:
    """Everything measured for one (content, style, pastiche) evaluation.

    ``style`` and ``total`` are under the driving metric: style is the
    weighted per-layer sum of classic or balanced values, and total is
    content + beta * style with the beta actually applied (which differs
    from the configured one when auto-calibration is on).
    """

    content: float
    layers: tuple[LayerLossReport, ...]
    classic_style: float
    balanced_style: float
    kind: LossKind
    beta: float

    @property
    def style(self) -> float:
        return self.classic_style if self.kind is LossKind.CLASSIC else self.balanced_style

    @property
    def total(self) -> float:
        return self.content + self.beta * self.style


def style_targets(feats: Mapping[str, FeatureMap], cfg: LossConfig) -> dict[str, GramMatrix]:
    """Gram matrices of the style features at every configured style tap."""
    return {spec.tap: gram(feats[spec.tap]) for spec in cfg.style_layers}


def reports_against_targets(targets: Mapping[str, GramMatrix],
                            pastiche_feats: Mapping[str, FeatureMap],
                            cfg: LossConfig) -> tuple[LayerLossReport, ...]:
    """Per-tap reports of the pastiche features against fixed target Grams.

    The normalization constant is taken from the pastiche map (the variable
    being optimized), which also covers style images of a different size.
    """
    rows = []
    for spec in cfg.style_layers:
        fp = pastiche_feats[spec.tap]
        n = norm_constant(fp, cfg.normalization)
        rows.append(layer_report(spec.tap, targets[spec.tap], gram(fp), n))
    return tuple(rows)


def assemble_report(content: float, layers: tuple[LayerLossReport, ...],
                    cfg: LossConfig, kind: LossKind, beta: float | None = None) -> PairReport:
    pairs_c = [(spec, row.classic) for spec, row in zip(cfg.style_layers, layers)]
    pairs_b = [(spec, row.balanced) for spec, row in zip(cfg.style_layers, layers)]
    return PairReport(
        content=content,
        layers=layers,
        classic_style=style_loss_total(pairs_c),
        balanced_style=style_loss_total(pairs_b),
        kind=LossKind(kind),
        beta=cfg.beta if beta is None else float(beta),
    )


def evaluate_pair(net: FeatNet, content: Image, style: Image, pastiche: Image,
                  cfg: LossConfig | None = None,
                  kind: LossKind = LossKind.CLASSIC) -> PairReport:
    """Score ``pastiche`` against ``content``/``style`` through ``net``."""
    cfg = cfg if cfg is not None else LossConfig()
    if content.data.shape != pastiche.data.shape:
        raise DimensionError("content and pastiche image shapes differ: "
                             f"{content.data.shape} vs {pastiche.data.shape}")
    style_taps = [spec.tap for spec in cfg.style_layers]
    taps = sorted(set(style_taps) | {cfg.content_layer})
    pastiche_feats = forward(net, pastiche, taps)
    content_feats = forward(net, content, [cfg.content_layer])
    style_feats = forward(net, style, style_taps)
    targets = style_targets(style_feats, cfg)
    layers = reports_against_targets(targets, pastiche_feats, cfg)
    c = _content_loss(content_feats[cfg.content_layer], pastiche_feats[cfg.content_layer])
    return assemble_report(c, layers, cfg, kind)
