"""Gram-matrix style losses with magnitude-normalized scoring.

The package measures style similarity between feature maps through Gram
matrices, brackets the classic squared-error style loss between closed-form
lower and upper bounds, and uses the upper bound to rescale the loss into a
[0, 1] range that is invariant to feature magnitude. On top of the loss core
sit a small deterministic convolutional feature network, analytic gradients
with a finite-difference harness, a pixel-space optimizer, and statistics
tooling (correlation, histograms, deception rate, Monte-Carlo bound checks).

``StyleFeatureExtractor`` and ``PixelStylizer`` (imported lazily to keep
scikit-learn off the CLI startup path) wrap the extractor and optimizer in
the familiar fit/transform estimator shape.
"""

from .analysis import (AnnotationRecord, FeatureBank, Histogram, LossTable,
                       McBoundsResult, MomentSpec, correlation_report,
                       deception_rate, expectation_bounds, histogram,
                       linear_fit, mc_expectation_bounds, nearest_style_ids,
                       pearson, relaxed_bounds)
from .exceptions import (ConfigError, DataError, DimensionError,
                         PreconditionError, StyleBalanceError)
from .featnet import FeatNet, NetConfig, build, default_config, forward
from .gradients import (GradCheckSummary, backprop_pixels, balanced_style_grad,
                        classic_style_grad, content_grad, finite_diff_check,
                        run_gradcheck, style_grad_to_target)
from .losses import (DEFAULT_CONTENT_TAP, DEFAULT_STYLE_TAPS, GramMatrix,
                     LayerLossReport, LayerSpec, LossConfig, Normalization,
                     balanced_layer_loss, classic_layer_loss, content_loss,
                     default_loss_config, gram, inf_bound, norm_constant,
                     nst_total, style_loss_total, sup_bound)
from .scoring import LossKind, PairReport, evaluate_pair
from .stylizer import (InitKind, OptimizeConfig, SweepResult, SweepRow,
                       stylize, sweep)
from .tensors import FeatureMap, Image
from .textures import noise_image, texture_image, texture_set

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord", "ConfigError", "DataError", "DimensionError",
    "DEFAULT_CONTENT_TAP", "DEFAULT_STYLE_TAPS", "FeatNet", "FeatureBank",
    "FeatureMap", "GradCheckSummary", "GramMatrix", "Histogram", "Image",
    "InitKind", "LayerLossReport", "LayerSpec", "LossConfig", "LossKind",
    "LossTable", "McBoundsResult", "MomentSpec", "NetConfig", "Normalization",
    "OptimizeConfig", "PairReport", "PixelStylizer", "PreconditionError",
    "StyleBalanceError", "StyleFeatureExtractor", "SweepResult", "SweepRow",
    "backprop_pixels", "balanced_layer_loss", "balanced_style_grad", "build",
    "classic_layer_loss", "classic_style_grad", "content_grad", "content_loss",
    "correlation_report", "deception_rate", "default_config",
    "default_loss_config", "evaluate_pair", "expectation_bounds",
    "finite_diff_check", "forward", "gram", "histogram", "inf_bound",
    "linear_fit", "mc_expectation_bounds", "nearest_style_ids", "noise_image",
    "norm_constant", "nst_total", "pearson", "relaxed_bounds", "run_gradcheck",
    "style_grad_to_target", "style_loss_total", "stylize", "sup_bound",
    "sweep", "texture_image", "texture_set",
]

_LAZY = {"StyleFeatureExtractor": "estimators", "PixelStylizer": "estimators"}


def __getattr__(name):
    if name in _LAZY:
        from importlib import import_module

        module = import_module(f".{_LAZY[name]}", __name__)
        value = getattr(module, name)
        globals()[name] = value
        return value
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(globals()) | set(_LAZY))
