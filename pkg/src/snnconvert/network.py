"""Feed-forward networks with trainable clipped-ReLU activations.

A network is an ordered list of layer specs (linear, conv2d, avgpool2d,
flatten).  Parametric layers may carry a clip activation
clip(z; 0, bound) = min(max(z, 0), bound) with a trainable upper bound;
the usual construction leaves the last linear layer bare so its output is
raw logits.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor
from .errors import ConfigError, ShapeError
from .rng import Rng

PARAMETRIC_KINDS = ("linear", "conv2d")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_features: int = 0
    out_features: int = 0
    in_channels: int = 0
    out_channels: int = 0
    kernel_size: int = 0
    stride: int = 1
    padding: int = 0
    window: int = 0
    has_clip: bool = False

    @property
    def parametric(self) -> bool:
        return self.kind in PARAMETRIC_KINDS


def linear(in_features: int, out_features: int, clip: bool = True) -> LayerSpec:
    return LayerSpec("linear", in_features=in_features, out_features=out_features, has_clip=clip)


def conv(in_channels: int, out_channels: int, kernel_size: int, stride: int = 1,
         padding: int = 0, clip: bool = True) -> LayerSpec:
    return LayerSpec("conv2d", in_channels=in_channels, out_channels=out_channels,
                     kernel_size=kernel_size, stride=stride, padding=padding, has_clip=clip)


def avgpool(window: int) -> LayerSpec:
    return LayerSpec("avgpool2d", window=window)


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def layer_output_shape(spec: LayerSpec, in_shape: tuple) -> tuple:
    """Shape a single layer produces from in_shape, or raise ShapeError."""
    if spec.kind == "linear":
        if in_shape != (spec.in_features,):
            raise ShapeError(f"linear({spec.in_features}->{spec.out_features}): input shape {in_shape}")
        return (spec.out_features,)
    if spec.kind == "conv2d":
        if len(in_shape) != 3 or in_shape[0] != spec.in_channels:
            raise ShapeError(f"conv2d expects [{spec.in_channels},h,w], got {in_shape}")
        c, h, w = in_shape
        span_h = h + 2 * spec.padding - spec.kernel_size
        span_w = w + 2 * spec.padding - spec.kernel_size
        if span_h < 0 or span_w < 0 or span_h % spec.stride or span_w % spec.stride:
            raise ConfigError(f"conv2d: non-integral output extent from input {in_shape}")
        return (spec.out_channels, span_h // spec.stride + 1, span_w // spec.stride + 1)
    if spec.kind == "avgpool2d":
        if len(in_shape) != 3:
            raise ShapeError(f"avgpool2d expects [c,h,w], got {in_shape}")
        c, h, w = in_shape
        if h % spec.window or w % spec.window:
            raise ConfigError(f"avgpool2d: extents {in_shape} not divisible by window {spec.window}")
        return (c, h // spec.window, w // spec.window)
    if spec.kind == "flatten":
        return (int(np.prod(in_shape)),)
    raise ConfigError(f"unknown layer kind {spec.kind!r}")


def output_shapes(layers: list[LayerSpec], input_shape: tuple) -> list[tuple]:
    shapes = []
    shape = tuple(input_shape)
    for spec in layers:
        shape = layer_output_shape(spec, shape)
        shapes.append(shape)
    return shapes


@dataclass
class AnnNetwork:
    """Layer specs plus per-layer parameters.

    weights/biases/clip_bounds are lists aligned with layers; entries are
    None for non-parametric layers, and clip_bounds is None for bare
    (unclipped) parametric layers.  Clip bounds must stay positive.
    """
    input_shape: tuple
    layers: list[LayerSpec]
    weights: list
    biases: list
    clip_bounds: list
    seed: int = 0

    def copy(self) -> "AnnNetwork":
        return AnnNetwork(
            input_shape=tuple(self.input_shape),
            layers=list(self.layers),
            weights=[None if w is None else w.copy() for w in self.weights],
            biases=[None if b is None else b.copy() for b in self.biases],
            clip_bounds=list(self.clip_bounds),
            seed=self.seed,
        )

    def validate(self) -> None:
        output_shapes(self.layers, self.input_shape)
        for i, spec in enumerate(self.layers):
            if spec.parametric:
                expect = ((spec.out_features, spec.in_features) if spec.kind == "linear"
                          else (spec.out_channels, spec.in_channels, spec.kernel_size, spec.kernel_size))
                if self.weights[i].shape != expect:
                    raise ShapeError(f"layer {i}: weight shape {self.weights[i].shape}, spec needs {expect}")
                if spec.has_clip and not (self.clip_bounds[i] > 0):
                    raise ConfigError(f"layer {i}: clip bound must be positive, got {self.clip_bounds[i]}")


def init_network(layers: list[LayerSpec], input_shape: tuple, rng: Rng) -> AnnNetwork:
    """Kaiming-uniform weights over fan-in, zero biases, clip bounds at 1."""
    output_shapes(layers, input_shape)  # composition check up front
    weights, biases, bounds = [], [], []
    for spec in layers:
        if not spec.parametric:
            weights.append(None)
            biases.append(None)
            bounds.append(None)
            continue
        if spec.kind == "linear":
            fan_in = spec.in_features
            shape = (spec.out_features, spec.in_features)
            n_out = spec.out_features
        else:
            fan_in = spec.in_channels * spec.kernel_size * spec.kernel_size
            shape = (spec.out_channels, spec.in_channels, spec.kernel_size, spec.kernel_size)
            n_out = spec.out_channels
        bound = float(np.sqrt(6.0 / fan_in))
        weights.append(rng.uniform(-bound, bound, shape))
        biases.append(np.zeros(n_out, dtype=np.float64))
        bounds.append(1.0 if spec.has_clip else None)
    return AnnNetwork(tuple(input_shape), list(layers), weights, biases, bounds,
                      seed=int(rng.seed))


def _apply_clip(z: np.ndarray, bound: float) -> np.ndarray:
    return np.clip(z, 0.0, bound)


def forward_batch(net: AnnNetwork, x: np.ndarray, want_preacts: bool = False):
    """Run a [n, ...] batch through the network.

    Returns (logits, activations) or, with want_preacts, a third list of
    pre-activation values for the parametric layers (None elsewhere).
    The recorded activation of each layer is its output after any clip;
    the last layer's entry is the logits themselves.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1:] != tuple(net.input_shape):
        raise ShapeError(f"input shape {x.shape[1:]} does not match network input {net.input_shape}")
    activations, preacts = [], []
    for i, spec in enumerate(net.layers):
        if spec.kind == "linear":
            z = tensor.affine(x, net.weights[i], net.biases[i])
        elif spec.kind == "conv2d":
            z = tensor.conv2d_batch(x, net.weights[i], net.biases[i], spec.stride, spec.padding)
        elif spec.kind == "avgpool2d":
            z = tensor.avgpool2d_batch(x, spec.window)
        elif spec.kind == "flatten":
            z = tensor.flatten_batch(x)
        else:
            raise ConfigError(f"unknown layer kind {spec.kind!r}")
        preacts.append(z if spec.parametric else None)
        x = _apply_clip(z, net.clip_bounds[i]) if spec.has_clip else z
        activations.append(x)
    if want_preacts:
        return activations[-1], activations, preacts
    return activations[-1], activations


def forward(net: AnnNetwork, x: np.ndarray):
    """Single-sample forward pass; returns (logits, activations)."""
    logits, acts = forward_batch(net, np.asarray(x, dtype=np.float64)[np.newaxis])
    return logits[0], [a[0] for a in acts]


def evaluate(net: AnnNetwork, data, batch_size: int = 512) -> float:
    """Fraction of samples whose argmax logit matches the label.

    Ties go to the lowest class index.  Per-sample results combine by an
    integer sum, so any sharding of the batch loop gives the same count.
    """
    n = data.inputs.shape[0]
    if n == 0:
        raise ConfigError("evaluate: empty dataset")
    correct = 0
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        logits, _ = forward_batch(net, data.inputs[start:stop])
        correct += int(np.sum(np.argmax(logits, axis=1) == data.labels[start:stop]))
    return correct / n


def desk_mlp(input_dim: int = 784, num_classes: int = 10) -> list[LayerSpec]:
    """Reference fully-connected architecture (784-256-128-10 by default)."""
    return [
        linear(input_dim, 256, clip=True),
        linear(256, 128, clip=True),
        linear(128, num_classes, clip=False),
    ]


def desk_cnn(input_shape: tuple = (1, 28, 28), num_classes: int = 10) -> list[LayerSpec]:
    """Reference convolutional architecture; exercises every layer kind."""
    c, h, w = input_shape
    if h % 4 or w % 4:
        raise ConfigError(f"desk_cnn needs spatial extents divisible by 4, got {input_shape}")
    flat = 16 * (h // 4) * (w // 4)
    return [
        conv(c, 8, 3, stride=1, padding=1, clip=True),
        avgpool(2),
        conv(8, 16, 3, stride=1, padding=1, clip=True),
        avgpool(2),
        flatten(),
        linear(flat, num_classes, clip=False),
    ]
