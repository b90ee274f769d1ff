"""Scikit-learn style wrappers around the extractor and the optimizer.

Both estimators follow the usual conventions: ``__init__`` stores its
arguments untouched, ``fit`` validates them and creates the trailing-
underscore attributes, and ``get_params``/``set_params`` come from
``BaseEstimator``. X is a sequence of images (``Image`` instances or
(H, W, 3) / (H, W) float arrays in [0, 1]) rather than a 2-D matrix, so
these compose with plain Python loops, not with sklearn pipelines that
reshape their input.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .featnet import build, default_config, forward
from .losses import LossConfig, Normalization, gram, norm_constant
from .stylizer import OptimizeConfig, stylize, task_seed
from .validation import as_image


def _require_fitted(estimator, attr: str) -> None:
    if not hasattr(estimator, attr):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first.")


class StyleFeatureExtractor(TransformerMixin, BaseEstimator):
    """Runs images through the deterministic feature network.

    ``transform`` returns one ``{tap: FeatureMap}`` dict per input image;
    ``gram_features`` flattens the normalized Gram matrix of a single tap
    into a vector per image, which is the shape the feature-bank tooling
    (nearest-neighbor artist matching) consumes.

    Parameters
    ----------
    taps:
        Tap names to extract; None means every tap the network exposes.
    seed:
        Weight-initialization seed for the network.
    weights_file:
        Optional weights file; overrides seeded initialization.
    """

    def __init__(self, taps=None, seed=0, weights_file=None):
        self.taps = taps
        self.seed = seed
        self.weights_file = weights_file

    def fit(self, X=None, y=None):
        cfg = default_config(seed=self.seed)
        if self.weights_file is not None:
            cfg = replace(cfg, weights_file=str(self.weights_file))
        self.net_ = build(cfg)
        if self.taps is None:
            self.taps_ = tuple(sorted(self.net_.taps, key=self.net_.taps.get))
        else:
            self.taps_ = tuple(self.taps)
            for tap in self.taps_:
                self.net_.tap_index(tap)  # raises ConfigError on unknown names
        return self

    def transform(self, X):
        _require_fitted(self, "net_")
        return [forward(self.net_, as_image(x), self.taps_) for x in X]

    def gram_features(self, X, tap=None, normalization=Normalization.CHANNELS_SQUARED):
        """(n_images, C*C) array of flattened Grams at ``tap``, divided by
        the layer's normalization constant so magnitudes are comparable
        across image sizes."""
        _require_fitted(self, "net_")
        tap = self.taps_[-1] if tap is None else tap
        rows = []
        for x in X:
            fm = forward(self.net_, as_image(x), [tap])[tap]
            g = gram(fm)
            rows.append(g.data.reshape(-1) / norm_constant(fm, normalization))
        return np.asarray(rows, dtype=np.float64)


class PixelStylizer(BaseEstimator):
    """Optimizes pastiches toward one style via fit(style) / transform(contents).

    Every content in ``transform`` is optimized independently with a seed
    derived from (seed, position), matching the grid-sweep convention, so
    results do not depend on how the inputs are batched.
    """

    def __init__(self, steps=200, step_size=0.02, loss="classic", beta=1.0,
                 auto_beta=False, init="content", seed=0):
        self.steps = steps
        self.step_size = step_size
        self.loss = loss
        self.beta = beta
        self.auto_beta = auto_beta
        self.init = init
        self.seed = seed

    def _config(self, seed: int) -> OptimizeConfig:
        loss_cfg = LossConfig(beta=self.beta)
        return OptimizeConfig(steps=self.steps, step_size=self.step_size,
                              seed=seed, init=self.init, loss_kind=self.loss,
                              loss=loss_cfg, auto_beta=self.auto_beta)

    def fit(self, X, y=None):
        self._config(0)  # validate hyperparameters before any heavy work
        self.style_ = as_image(X)
        self.net_ = build(default_config(seed=self.seed))
        return self

    def transform(self, X):
        _require_fitted(self, "net_")
        out = []
        for i, x in enumerate(X):
            cfg = self._config(task_seed(self.seed, i))
            pastiche, _ = stylize(self.net_, as_image(x),
                                  self.style_, cfg)
            out.append(pastiche)
        return out
