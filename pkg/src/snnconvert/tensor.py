"""Dense float64 array operations with a pinned accumulation order.

Values travel as C-contiguous float64 numpy arrays ("tensors"); the
row-major flat layout gives element (i0, ..., ik) the usual C offset.

Every reduction below accumulates in ascending index order: matmul sums
k = 0, 1, 2, ...; convolution sums over (input channel, kernel row, kernel
column); pooling sums window cells row-major, then divides once.  Bias is
added after the product accumulation finishes.  Pinning the order makes
results bit-identical across runs, platforms and BLAS builds, which the
exact simulator/closed-form equivalence checks depend on.  The price is
speed, acceptable at the network sizes this package targets.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError


def as_tensor(x) -> np.ndarray:
    """Coerce to a C-contiguous float64 array."""
    return np.ascontiguousarray(x, dtype=np.float64)


def matmul(a, b) -> np.ndarray:
    """Matrix product of [m,k] by [k,n], accumulated over ascending k.

    Each step adds one rank-1 update, so out[i, j] receives the products
    a[i, 0]*b[0, j], a[i, 1]*b[1, j], ... in exactly that order, matching
    a naive triple loop bit for bit.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    tmp = np.empty((m, n), dtype=np.float64)
    for i in range(k):
        np.multiply(a[:, i, np.newaxis], b[i], out=tmp)
        out += tmp
    return out


def affine(x, weight, bias) -> np.ndarray:
    """Batched linear map: x [n,in] times weight [out,in] plus bias [out]."""
    z = matmul(x, weight.T)
    z += bias
    return z


def _conv_output_extent(size: int, kernel: int, stride: int, padding: int, axis: str) -> int:
    span = size + 2 * padding - kernel
    if span < 0 or span % stride != 0:
        raise ConfigError(
            f"conv2d: {axis} extent {size} with kernel {kernel}, stride {stride}, "
            f"padding {padding} gives a non-integral output extent"
        )
    return span // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int):
    """Expand [n,c,h,w] into patch rows [n*h_out*w_out, c*kh*kw].

    Column order is (channel, kernel row, kernel column) ascending, so a
    downstream matmul accumulates patches in that order.
    """
    n, c, h, w = x.shape
    h_out = _conv_output_extent(h, kh, stride, padding, "height")
    w_out = _conv_output_extent(w, kw, stride, padding, "width")
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = np.empty((n, c, kh, kw, h_out, w_out), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            windows[:, :, u, v] = x[:, :, u : u + (h_out - 1) * stride + 1 : stride,
                                    v : v + (w_out - 1) * stride + 1 : stride]
    cols = windows.reshape(n, c * kh * kw, h_out * w_out)
    cols = np.ascontiguousarray(cols.transpose(0, 2, 1)).reshape(n * h_out * w_out, c * kh * kw)
    return cols, h_out, w_out


def conv2d_batch(x, kernel, bias, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Cross-correlation of [n,c_in,h,w] with [c_out,c_in,kh,kw] plus bias.

    Zero padding; products accumulate over ascending (c_in, kh, kw), bias
    added last, as a naive six-loop implementation would do.
    """
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if x.ndim != 4 or kernel.ndim != 4 or x.shape[1] != kernel.shape[1]:
        raise ShapeError(f"conv2d: input {x.shape} does not compose with kernel {kernel.shape}")
    if bias.shape != (kernel.shape[0],):
        raise ShapeError(f"conv2d: bias {bias.shape} does not match kernel {kernel.shape}")
    n = x.shape[0]
    c_out = kernel.shape[0]
    kh, kw = kernel.shape[2], kernel.shape[3]
    cols, h_out, w_out = _im2col(x, kh, kw, stride, padding)
    kmat = kernel.reshape(c_out, -1)
    out = matmul(cols, kmat.T)
    out += bias
    out = out.reshape(n, h_out, w_out, c_out).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out)


def conv2d(x, kernel, bias, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Single-sample convolution of [c_in,h,w]; see conv2d_batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"conv2d: expected rank-3 input [c,h,w], got {x.shape}")
    return conv2d_batch(x[np.newaxis], kernel, bias, stride, padding)[0]


def avgpool2d_batch(x, window: int) -> np.ndarray:
    """Mean over non-overlapping window x window blocks of [n,c,h,w].

    Window cells are summed row-major (ascending u, then v) and divided
    once at the end.
    """
    x = np.asarray(x, dtype=np.float64)
    n, c, h, w = x.shape
    if h % window or w % window:
        raise ConfigError(f"avgpool2d: extents {(h, w)} not divisible by window {window}")
    out = np.zeros((n, c, h // window, w // window), dtype=np.float64)
    for u in range(window):
        for v in range(window):
            out += x[:, :, u::window, v::window]
    out /= window * window
    return out


def avgpool2d(x, window: int) -> np.ndarray:
    """Single-sample pooling of [c,h,w]; see avgpool2d_batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"avgpool2d: expected rank-3 input [c,h,w], got {x.shape}")
    return avgpool2d_batch(x[np.newaxis], window)[0]


def flatten_batch(x) -> np.ndarray:
    """Row-major flatten of everything after the batch axis."""
    x = np.asarray(x, dtype=np.float64)
    return np.ascontiguousarray(x).reshape(x.shape[0], -1)
