"""Shared fixtures and independent oracle implementations.

The oracles here are deliberately naive (scalar loops, finite
differences) and never share code with the library paths they check.
"""

import time

import numpy as np
import pytest

import snnconvert as sc
from snnconvert.training import TrainConfig


# ---------------------------------------------------------------- oracles

def naive_matmul(a, b):
    """Triple loop, ascending k, accumulation into a scalar."""
    m, k = a.shape
    k2, n = b.shape
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def naive_conv2d(x, kernel, bias, stride=1, padding=0):
    """Six nested loops; products ascending (c_in, u, v), bias added last."""
    c_in, h, w = x.shape
    c_out, _, kh, kw = kernel.shape
    xp = np.zeros((c_in, h + 2 * padding, w + 2 * padding))
    xp[:, padding : padding + h, padding : padding + w] = x
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((c_out, h_out, w_out))
    for co in range(c_out):
        for y in range(h_out):
            for xo in range(w_out):
                acc = 0.0
                for ci in range(c_in):
                    for u in range(kh):
                        for v in range(kw):
                            acc += xp[ci, y * stride + u, xo * stride + v] * kernel[co, ci, u, v]
                out[co, y, xo] = acc + bias[co]
    return out


def naive_avgpool2d(x, window):
    """Sum window cells row-major, divide once."""
    c, h, w = x.shape
    out = np.zeros((c, h // window, w // window))
    for ci in range(c):
        for y in range(h // window):
            for xo in range(w // window):
                acc = 0.0
                for u in range(window):
                    for v in range(window):
                        acc += x[ci, y * window + u, xo * window + v]
                out[ci, y, xo] = acc / (window * window)
    return out


def finite_difference_grads(net, inputs, labels, cfg, probes=20, h=1e-5, seed=0):
    """Central differences of the training objective at random indices.

    Yields (name, layer, index, analytic, numeric) for every probe.
    """
    from snnconvert.training import batch_loss, loss_and_grads

    _, grads = loss_and_grads(net, inputs, labels, cfg)
    rng = sc.Rng(seed)
    for i, spec in enumerate(net.layers):
        if not spec.parametric:
            continue
        for name, arr in (("W", net.weights[i]), ("b", net.biases[i])):
            flat = arr.reshape(-1)
            count = min(probes, flat.size)
            picks = (rng.uint64(count) % np.uint64(flat.size)).astype(np.int64)
            for idx in picks:
                orig = flat[idx]
                flat[idx] = orig + h
                up = batch_loss(net, inputs, labels, cfg)
                flat[idx] = orig - h
                down = batch_loss(net, inputs, labels, cfg)
                flat[idx] = orig
                yield (name, i, int(idx), float(grads[name][i].reshape(-1)[idx]),
                       (up - down) / (2 * h))
        if spec.has_clip:
            orig = net.clip_bounds[i]
            net.clip_bounds[i] = orig + h
            up = batch_loss(net, inputs, labels, cfg)
            net.clip_bounds[i] = orig - h
            down = batch_loss(net, inputs, labels, cfg)
            net.clip_bounds[i] = orig
            yield ("theta", i, 0, float(grads["theta"][i]), (up - down) / (2 * h))


# --------------------------------------------------------------- fixtures

MLP_TRAIN_SEED = 5
CNN_TRAIN_SEED = 9


@pytest.fixture(scope="session")
def blob_train():
    return sc.make_blob_images(3000, seed=11, flat=True)


@pytest.fixture(scope="session")
def blob_test():
    return sc.make_blob_images(800, seed=12, flat=True)


@pytest.fixture(scope="session")
def cnn_train():
    return sc.make_blob_images(1200, seed=21)


@pytest.fixture(scope="session")
def cnn_test():
    return sc.make_blob_images(100, seed=22)


@pytest.fixture(scope="session")
def trained_mlp(blob_train):
    """Reference fully-connected network; also reports its training time."""
    net = sc.init_network(sc.desk_mlp(784, 10), (784,), sc.Rng(MLP_TRAIN_SEED))
    started = time.time()
    net = sc.train(net, blob_train, TrainConfig(epochs=15, seed=MLP_TRAIN_SEED))
    return net, time.time() - started


@pytest.fixture(scope="session")
def trained_cnn(cnn_train):
    net = sc.init_network(sc.desk_cnn((1, 28, 28), 10), (1, 28, 28), sc.Rng(CNN_TRAIN_SEED))
    net = sc.train(net, cnn_train, TrainConfig(epochs=4, batch_size=32, seed=CNN_TRAIN_SEED))
    return net


def small_mlp(seed=3, dims=(6, 10, 8, 4)):
    layers = [sc.linear(dims[0], dims[1], clip=True),
              sc.linear(dims[1], dims[2], clip=True),
              sc.linear(dims[2], dims[3], clip=False)]
    return sc.init_network(layers, (dims[0],), sc.Rng(seed))
