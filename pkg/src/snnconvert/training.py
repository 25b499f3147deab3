"""SGD training with manual backpropagation.

Loss is softmax cross-entropy plus separate L2 penalties for {W, b} and
for the clip bounds.  The clip activation backpropagates 1 on the open
interval (0, bound) and 0 elsewhere (both kinks included); the bound's
own gradient collects the upstream gradient wherever the pre-activation
reached or exceeded it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor
from .errors import ConfigError, ShapeError, TrainingDivergedError
from .network import AnnNetwork, LayerSpec
from .rng import Rng

# Clip bounds stay strictly positive; training never drives them below this.
MIN_CLIP_BOUND = 1e-3


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    momentum: float = 0.9
    epochs: int = 20
    batch_size: int = 64
    weight_decay_w: float = 5e-4
    weight_decay_theta: float = 5e-4
    lr_schedule: str = "cosine"  # "constant" or "cosine"
    seed: int = 0

    def validate(self, n_samples: int | None = None) -> None:
        finite = all(math.isfinite(v) for v in
                     (self.learning_rate, self.momentum, self.weight_decay_w, self.weight_decay_theta))
        if not finite or self.learning_rate < 0:
            raise ConfigError("learning rate and decays must be finite and non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch size must be positive")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ConfigError(f"unknown lr schedule {self.lr_schedule!r}")
        if n_samples is not None and self.batch_size > n_samples:
            raise ConfigError(f"batch size {self.batch_size} exceeds dataset size {n_samples}")


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(labels)), labels]
    return float(np.mean(logz - picked))


def _l2_terms(net: AnnNetwork, cfg: TrainConfig) -> float:
    # divergence shows up as inf here; the caller turns that into an error
    acc = 0.0
    with np.errstate(over="ignore"):
        for i, spec in enumerate(net.layers):
            if not spec.parametric:
                continue
            acc += 0.5 * cfg.weight_decay_w * (float(np.sum(net.weights[i] ** 2))
                                               + float(np.sum(net.biases[i] ** 2)))
            if spec.has_clip:
                acc += 0.5 * cfg.weight_decay_theta * net.clip_bounds[i] ** 2
    return acc


def batch_loss(net: AnnNetwork, inputs: np.ndarray, labels: np.ndarray, cfg: TrainConfig) -> float:
    """Full training objective on one batch (data term plus L2 terms)."""
    from .network import forward_batch
    with np.errstate(over="ignore", invalid="ignore"):
        logits, _ = forward_batch(net, inputs)
        return _cross_entropy(logits, labels) + _l2_terms(net, cfg)


def _forward_cached(net: AnnNetwork, x: np.ndarray):
    """Forward pass keeping what backward needs per layer."""
    caches = []
    for i, spec in enumerate(net.layers):
        if spec.kind == "linear":
            z = tensor.affine(x, net.weights[i], net.biases[i])
            cache = {"x": x, "z": z}
        elif spec.kind == "conv2d":
            cols, h_out, w_out = tensor._im2col(x, spec.kernel_size, spec.kernel_size,
                                                spec.stride, spec.padding)
            kmat = net.weights[i].reshape(net.weights[i].shape[0], -1)
            z = tensor.matmul(cols, kmat.T)
            z += net.biases[i]
            n = x.shape[0]
            z = np.ascontiguousarray(
                z.reshape(n, h_out, w_out, kmat.shape[0]).transpose(0, 3, 1, 2))
            cache = {"x_shape": x.shape, "cols": cols, "z": z, "hw": (h_out, w_out)}
        elif spec.kind == "avgpool2d":
            z = tensor.avgpool2d_batch(x, spec.window)
            cache = {"x_shape": x.shape}
        else:  # flatten
            z = tensor.flatten_batch(x)
            cache = {"x_shape": x.shape}
        if spec.has_clip:
            x = np.clip(z, 0.0, net.clip_bounds[i])
        else:
            x = z
        caches.append(cache)
    return x, caches


def _col2im(dcols: np.ndarray, x_shape: tuple, kernel_size: int, stride: int,
            padding: int, hw: tuple) -> np.ndarray:
    n, c, h, w = x_shape
    h_out, w_out = hw
    dpad = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=np.float64)
    d6 = dcols.reshape(n, h_out * w_out, c, kernel_size, kernel_size).transpose(0, 2, 3, 4, 1)
    d6 = d6.reshape(n, c, kernel_size, kernel_size, h_out, w_out)
    for u in range(kernel_size):
        for v in range(kernel_size):
            dpad[:, :, u : u + (h_out - 1) * stride + 1 : stride,
                 v : v + (w_out - 1) * stride + 1 : stride] += d6[:, :, u, v]
    if padding:
        return dpad[:, :, padding:-padding, padding:-padding]
    return dpad


def loss_and_grads(net: AnnNetwork, inputs: np.ndarray, labels: np.ndarray, cfg: TrainConfig):
    """Objective value and gradients for every W, b and clip bound.

    Gradient matmuls go through BLAS (no ordering contract); the analytic
    results are checked against central finite differences in the tests.
    """
    n = inputs.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        logits, caches = _forward_cached(net, inputs)
        loss = _cross_entropy(logits, labels) + _l2_terms(net, cfg)
    if not math.isfinite(loss):
        raise TrainingDivergedError("non-finite loss")

    probs = _softmax(logits)
    probs[np.arange(n), labels] -= 1.0
    dx = probs / n

    grads_w = [None] * len(net.layers)
    grads_b = [None] * len(net.layers)
    grads_theta = [None] * len(net.layers)

    for i in reversed(range(len(net.layers))):
        spec = net.layers[i]
        cache = caches[i]
        if spec.has_clip:
            z = cache["z"]
            bound = net.clip_bounds[i]
            grads_theta[i] = float(np.sum(dx[z >= bound])) + cfg.weight_decay_theta * bound
            dx = dx * ((z > 0.0) & (z < bound))
        if spec.kind == "linear":
            grads_w[i] = cache["x"].T @ dx
            grads_w[i] = np.ascontiguousarray(grads_w[i].T) + cfg.weight_decay_w * net.weights[i]
            grads_b[i] = dx.sum(axis=0) + cfg.weight_decay_w * net.biases[i]
            dx = dx @ net.weights[i]
        elif spec.kind == "conv2d":
            c_out = spec.out_channels
            dz_cols = np.ascontiguousarray(dx.transpose(0, 2, 3, 1)).reshape(-1, c_out)
            dk = dz_cols.T @ cache["cols"]
            grads_w[i] = dk.reshape(net.weights[i].shape) + cfg.weight_decay_w * net.weights[i]
            grads_b[i] = dz_cols.sum(axis=0) + cfg.weight_decay_w * net.biases[i]
            dcols = dz_cols @ net.weights[i].reshape(c_out, -1)
            dx = _col2im(dcols, cache["x_shape"], spec.kernel_size, spec.stride,
                         spec.padding, cache["hw"])
        elif spec.kind == "avgpool2d":
            w = spec.window
            up = np.zeros(cache["x_shape"], dtype=np.float64)
            scaled = dx / (w * w)
            for u in range(w):
                for v in range(w):
                    up[:, :, u::w, v::w] = scaled
            dx = up
        else:  # flatten
            dx = dx.reshape(cache["x_shape"])

    return loss, {"W": grads_w, "b": grads_b, "theta": grads_theta}


def train(net: AnnNetwork, data, cfg: TrainConfig) -> AnnNetwork:
    """SGD with momentum over shuffled mini-batches; returns a new network.

    The input network is left untouched.  Raises TrainingDivergedError
    (naming epoch and batch) if the loss goes non-finite.
    """
    cfg.validate(n_samples=data.inputs.shape[0])
    if data.inputs.shape[1:] != tuple(net.input_shape):
        raise ShapeError(f"data shape {data.inputs.shape[1:]} does not match network "
                         f"input {net.input_shape}")
    out = net.copy()
    out.seed = cfg.seed
    rng = Rng(cfg.seed).derive(0xB41C)
    vel_w = [None if w is None else np.zeros_like(w) for w in out.weights]
    vel_b = [None if b is None else np.zeros_like(b) for b in out.biases]
    vel_t = [0.0 if t is not None else None for t in out.clip_bounds]
    n = data.inputs.shape[0]

    for epoch in range(cfg.epochs):
        if cfg.lr_schedule == "cosine":
            lr = cfg.learning_rate * 0.5 * (1.0 + math.cos(math.pi * epoch / cfg.epochs))
        else:
            lr = cfg.learning_rate
        order = rng.permutation(n)
        for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
            sel = order[start : start + cfg.batch_size]
            try:
                _, grads = loss_and_grads(out, data.inputs[sel], data.labels[sel], cfg)
            except TrainingDivergedError:
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {batch_idx}") from None
            for i, spec in enumerate(out.layers):
                if not spec.parametric:
                    continue
                vel_w[i] = cfg.momentum * vel_w[i] + grads["W"][i]
                vel_b[i] = cfg.momentum * vel_b[i] + grads["b"][i]
                out.weights[i] -= lr * vel_w[i]
                out.biases[i] -= lr * vel_b[i]
                if spec.has_clip:
                    vel_t[i] = cfg.momentum * vel_t[i] + grads["theta"][i]
                    out.clip_bounds[i] = max(out.clip_bounds[i] - lr * vel_t[i], MIN_CLIP_BOUND)
    return out
