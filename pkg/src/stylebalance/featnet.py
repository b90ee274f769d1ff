"""A small deterministic convolutional feature extractor with named taps.

The network is a plain layer list built from three kinds: ``Conv`` (odd
kernel, stride 1, zero padding that preserves the spatial size), ``Relu``
(optionally tagged as a tap whose activations callers can read), and
``AvgPool`` (2x2, stride 2). The default architecture has four blocks with
widths 8/16/32/64; the first two blocks hold two convolutions, the last two
hold three, and a tap sits on the last ReLU of every block:

    b1_r2 -> b2_r2 -> b3_r3 -> b4_r3

Weights are drawn per layer from uniform(-a, a) with a = sqrt(6 / (fan_in +
fan_out)); biases are zero, which makes the whole net positively homogeneous
in the input. Every parameter value is a pure function of (seed, layer
index, flat parameter index) through splitmix64, so a given configuration
builds bit-identically on every platform. Forward passes run under a
single-thread BLAS guard so results do not depend on thread count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .exceptions import ConfigError, DimensionError
from .tensors import FeatureMap, Image
from .util import mix64_array, single_thread, stream_key

POOL_SIZE = 2


@dataclass(frozen=True)
class Conv:
    in_ch: int
    out_ch: int
    kernel: int = 3


@dataclass(frozen=True)
class Relu:
    tap: str | None = None


@dataclass(frozen=True)
class AvgPool:
    pass


Layer = Conv | Relu | AvgPool


def default_layers(in_channels: int = 3) -> tuple[Layer, ...]:
    """The stock four-block architecture (about 1.2e5 weights)."""
    blocks = [(8, 2, "b1_r2"), (16, 2, "b2_r2"), (32, 3, "b3_r3"), (64, 3, "b4_r3")]
    layers: list[Layer] = []
    prev = in_channels
    for width, convs, tap in blocks:
        for j in range(convs):
            layers.append(Conv(prev, width, 3))
            layers.append(Relu(tap if j == convs - 1 else None))
            prev = width
        layers.append(AvgPool())
    return tuple(layers)


@dataclass(frozen=True)
class NetConfig:
    """Architecture plus parameter source (seed init or a weights file)."""

    layers: tuple[Layer, ...] = None  # type: ignore[assignment]
    seed: int = 0
    weights_file: str | None = None
    in_channels: int = 3

    def __post_init__(self):
        layers = self.layers if self.layers is not None else default_layers(self.in_channels)
        object.__setattr__(self, "layers", tuple(layers))


def default_config(seed: int = 0, in_channels: int = 3) -> NetConfig:
    return NetConfig(layers=default_layers(in_channels), seed=seed,
                     in_channels=in_channels)


class FeatNet:
    """An immutable built network: layers, conv parameters, tap registry."""

    def __init__(self, layers: Sequence[Layer], params: Mapping[int, tuple[np.ndarray, np.ndarray]]):
        self.layers = tuple(layers)
        self.params = dict(params)
        for w, b in self.params.values():
            w.flags.writeable = False
            b.flags.writeable = False
        self.taps = {}
        for idx, layer in enumerate(self.layers):
            if isinstance(layer, Relu) and layer.tap is not None:
                self.taps[layer.tap] = idx
        first = next((l for l in self.layers if isinstance(l, Conv)), None)
        self.in_channels = first.in_ch if first is not None else 0

    def tap_index(self, tap: str) -> int:
        if tap not in self.taps:
            raise ConfigError(f"unknown tap {tap!r}; available: {sorted(self.taps)}")
        return self.taps[tap]

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in self.params.values())


def _validate_layers(layers: Sequence[Layer]) -> None:
    if not layers:
        raise ConfigError("network needs at least one layer")
    prev_ch = None
    seen_taps = set()
    for idx, layer in enumerate(layers):
        if isinstance(layer, Conv):
            if layer.kernel < 1 or layer.kernel % 2 == 0:
                raise ConfigError(f"layer {idx}: kernel must be odd and >= 1, got {layer.kernel}")
            if layer.in_ch < 1 or layer.out_ch < 1:
                raise ConfigError(f"layer {idx}: channel counts must be positive")
            if prev_ch is not None and layer.in_ch != prev_ch:
                raise ConfigError(
                    f"layer {idx}: in_ch {layer.in_ch} does not match previous width {prev_ch}")
            prev_ch = layer.out_ch
        elif isinstance(layer, Relu):
            if layer.tap is not None:
                if layer.tap in seen_taps:
                    raise ConfigError(f"duplicate tap name {layer.tap!r}")
                seen_taps.add(layer.tap)
        elif isinstance(layer, AvgPool):
            pass
        else:
            raise ConfigError(f"layer {idx}: unknown layer kind {layer!r}")


def init_weights(layers: Sequence[Layer], seed: int) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Draw conv parameters deterministically from (seed, layer, param index).

    Weight i of conv layer L is a * (2 u - 1) where u uses the top 53 bits
    of mix64(stream_key(seed, L) ^ i) and a = sqrt(6 / (fan_in + fan_out))
    with fan_in = in_ch * k^2, fan_out = out_ch * k^2. Biases are zero.
    """
    params: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for idx, layer in enumerate(layers):
        if not isinstance(layer, Conv):
            continue
        k = layer.kernel
        fan_in = layer.in_ch * k * k
        fan_out = layer.out_ch * k * k
        a = np.sqrt(6.0 / (fan_in + fan_out))
        count = layer.out_ch * layer.in_ch * k * k
        key = np.uint64(stream_key(seed, idx))
        z = mix64_array(key ^ np.arange(count, dtype=np.uint64))
        u = (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        w = (a * (2.0 * u - 1.0)).reshape(layer.out_ch, layer.in_ch, k, k)
        b = np.zeros(layer.out_ch, dtype=np.float64)
        params[idx] = (np.ascontiguousarray(w), b)
    return params


def build(cfg: NetConfig) -> FeatNet:
    """Construct a FeatNet from ``cfg``, initializing or loading weights."""
    _validate_layers(cfg.layers)
    if cfg.weights_file is not None:
        from .fileio import read_weights
        return read_weights(cfg.weights_file, cfg)
    return FeatNet(cfg.layers, init_weights(cfg.layers, cfg.seed))


# ---------------------------------------------------------------------------
# forward / backward mechanics


@dataclass
class ForwardCache:
    """Inputs of every executed layer, for the backward walk.

    ``inputs[i]`` is the array fed to layer i; ``last`` is the index of the
    deepest executed layer. element_count() totals the retained activation
    entries (useful for accounting tests).
    """

    inputs: list[np.ndarray]
    last: int

    def element_count(self) -> int:
        return sum(a.size for a in self.inputs)


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    out_ch, in_ch, k, _ = w.shape
    h, wd = x.shape[0], x.shape[1]
    p = (k - 1) // 2
    padded = np.pad(x, ((p, p), (p, p), (0, 0)))
    out = np.broadcast_to(b, (h, wd, out_ch)).copy()
    for dy in range(k):
        for dx in range(k):
            out += padded[dy:dy + h, dx:dx + wd, :] @ w[:, :, dy, dx].T
    return out


def _conv_backward(dout: np.ndarray, x_shape, w: np.ndarray) -> np.ndarray:
    k = w.shape[2]
    h, wd = x_shape[0], x_shape[1]
    p = (k - 1) // 2
    dpad = np.zeros((h + 2 * p, wd + 2 * p, w.shape[1]), dtype=np.float64)
    for dy in range(k):
        for dx in range(k):
            dpad[dy:dy + h, dx:dx + wd, :] += dout @ w[:, :, dy, dx]
    return dpad[p:p + h, p:p + wd, :]


def _pool_forward(x: np.ndarray, layer_idx: int) -> np.ndarray:
    h, w, c = x.shape
    if h % POOL_SIZE or w % POOL_SIZE:
        raise DimensionError(
            f"layer {layer_idx}: average pooling needs even spatial dims, got {h}x{w}")
    return x.reshape(h // 2, 2, w // 2, 2, c).mean(axis=(1, 3))


def _pool_backward(dout: np.ndarray) -> np.ndarray:
    h2, w2, c = dout.shape
    quarter = dout * 0.25
    dx = np.empty((h2, 2, w2, 2, c), dtype=np.float64)
    dx[:, 0, :, 0, :] = quarter
    dx[:, 0, :, 1, :] = quarter
    dx[:, 1, :, 0, :] = quarter
    dx[:, 1, :, 1, :] = quarter
    return dx.reshape(h2 * 2, w2 * 2, c)


def _run_forward(net: FeatNet, image: Image, tap_names: Sequence[str], keep_cache: bool):
    if image.channels != net.in_channels:
        raise DimensionError(
            f"image has {image.channels} channels but the first conv expects {net.in_channels}")
    indices = {name: net.tap_index(name) for name in tap_names}
    last = max(indices.values()) if indices else -1
    x = image.data
    feats: dict[str, FeatureMap] = {}
    inputs: list[np.ndarray] = []
    for idx in range(last + 1):
        layer = net.layers[idx]
        if keep_cache:
            inputs.append(x)
        if isinstance(layer, Conv):
            w, b = net.params[idx]
            x = _conv_forward(x, w, b)
        elif isinstance(layer, Relu):
            x = np.maximum(x, 0.0)
            if layer.tap is not None and layer.tap in indices:
                feats[layer.tap] = FeatureMap(x, nonneg=True)
        else:
            x = _pool_forward(x, idx)
    cache = ForwardCache(inputs, last) if keep_cache else None
    return feats, cache


def _resolve_taps(net: FeatNet, taps) -> list[str]:
    if taps is None:
        return sorted(net.taps, key=net.taps.get)
    names = list(taps)
    for name in names:
        net.tap_index(name)
    return names


def forward(net: FeatNet, image: Image, taps=None) -> dict[str, FeatureMap]:
    """Activations at the requested taps (all registered taps by default).

    Execution stops after the deepest requested tap, so shallow reads never
    pay for (or require pool-compatibility of) the layers below them.
    """
    with single_thread():
        feats, _ = _run_forward(net, image, _resolve_taps(net, taps), keep_cache=False)
    return feats


def forward_with_cache(net: FeatNet, image: Image, taps=None):
    """Like :func:`forward` but also returns the activation cache."""
    with single_thread():
        return _run_forward(net, image, _resolve_taps(net, taps), keep_cache=True)


def backward_from_cache(net: FeatNet, cache: ForwardCache,
                        injected: Mapping[int, np.ndarray]) -> np.ndarray:
    """Pixel gradient given output-side gradients injected at ReLU layers.

    ``injected`` maps layer index -> gradient w.r.t. that layer's output;
    contributions at the same index must be pre-summed by the caller.
    """
    if not injected:
        raise ConfigError("no gradients to propagate")
    deepest = max(injected)
    if deepest > cache.last:
        raise ConfigError(f"cache covers layers up to {cache.last}, need {deepest}")
    grad = None
    for idx in range(deepest, -1, -1):
        layer = net.layers[idx]
        x = cache.inputs[idx]
        if idx in injected:
            g = injected[idx]
            out_shape = _output_shape(layer, x, net, idx)
            if g.shape != out_shape:
                raise DimensionError(
                    f"injected gradient at layer {idx} has shape {g.shape}, "
                    f"activation has {out_shape}")
            grad = g.copy() if grad is None else grad + g
        if grad is None:
            continue
        if isinstance(layer, Conv):
            grad = _conv_backward(grad, x.shape, net.params[idx][0])
        elif isinstance(layer, Relu):
            grad = grad * (x > 0.0)
        else:
            grad = _pool_backward(grad)
    assert grad is not None
    return grad


def _output_shape(layer: Layer, x: np.ndarray, net: FeatNet, idx: int):
    if isinstance(layer, Conv):
        return (x.shape[0], x.shape[1], layer.out_ch)
    if isinstance(layer, Relu):
        return x.shape
    return (x.shape[0] // POOL_SIZE, x.shape[1] // POOL_SIZE, x.shape[2])
