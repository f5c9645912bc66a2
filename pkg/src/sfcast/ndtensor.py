"""Dense float64 tensors and the few kernels the layers are built on.

A tensor here is a C-contiguous ``numpy.ndarray`` of dtype float64: the shape
tuple is the shape metadata and the buffer is the row-major flat data. The
public kernels validate shapes and refuse to return non-finite values.
"""

import numpy as np

from .errors import EmptyTensorError, NonFiniteError, ShapeError, WindowTooLongError

Tensor = np.ndarray

ACTIVATIONS = ("relu", "sigmoid", "tanh", "linear")


def as_tensor(x, name="tensor"):
    """Copy-free conversion to a finite, C-contiguous float64 array."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if 0 in arr.shape:
        raise EmptyTensorError(f"{name} has a zero-length dimension: shape {arr.shape}")
    _check_finite(arr, name)
    return arr


def _check_finite(arr, name):
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{name} contains NaN or Inf")


def matmul(a, b):
    """Matrix product of an (m, k) and a (k, n) tensor."""
    a = as_tensor(a, "a")
    b = as_tensor(b, "b")
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    _check_finite(out, "matmul output")
    return out


def conv1d_valid(x, kernels, bias):
    """Stride-1 valid cross-correlation of a (T, C_in) signal.

    ``kernels`` has shape (K, C_in, C_out) and ``bias`` shape (C_out,). The
    result has shape (T - K + 1, C_out) with
    ``out[t, f] = bias[f] + sum_{k, c} x[t + k, c] * kernels[k, c, f]``.
    """
    x = as_tensor(x, "input")
    kernels = as_tensor(kernels, "kernels")
    bias = as_tensor(bias, "bias")
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or kernels.ndim != 3:
        raise ShapeError(f"conv1d expects (T, C_in) input and (K, C_in, C_out) kernels, "
                         f"got {x.shape} and {kernels.shape}")
    T, c_in = x.shape
    K, k_cin, c_out = kernels.shape
    if k_cin != c_in:
        raise ShapeError(f"conv1d channel mismatch: input {x.shape}, kernels {kernels.shape}")
    if bias.shape != (c_out,):
        raise ShapeError(f"conv1d bias shape {bias.shape}, expected ({c_out},)")
    if T < K:
        raise WindowTooLongError(f"kernel of length {K} does not fit input of length {T}")
    out = im2col(x[None], K)[0] @ kernels.reshape(K * c_in, c_out) + bias
    _check_finite(out, "conv1d output")
    return out


def im2col(x, K):
    """Unfold (B, T, C) into (B, T-K+1, K*C) patches, tap-major then channel."""
    B, T, C = x.shape
    n = T - K + 1
    cols = np.empty((B, n, K * C))
    for k in range(K):
        cols[:, :, k * C:(k + 1) * C] = x[:, k:k + n, :]
    return cols


def col2im(dcols, K, T):
    """Adjoint of :func:`im2col`: scatter-add patch gradients back to (B, T, C)."""
    B, n, KC = dcols.shape
    C = KC // K
    dx = np.zeros((B, T, C))
    for k in range(K):
        dx[:, k:k + n, :] += dcols[:, :, k * C:(k + 1) * C]
    return dx


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _apply(x, kind):
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "linear":
        return x.copy()
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def activation(x, kind):
    """Elementwise relu, sigmoid, tanh or linear (identity)."""
    return _apply(as_tensor(x, "input"), kind)


def activation_grad(out, kind):
    """Derivative of the activation, expressed through its output.

    The ReLU derivative at exactly zero is taken as 0.
    """
    if kind == "relu":
        return (out > 0).astype(np.float64)
    if kind == "sigmoid":
        return out * (1.0 - out)
    if kind == "tanh":
        return 1.0 - out * out
    if kind == "linear":
        return np.ones_like(out)
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def reduce_mean(x):
    """Arithmetic mean of every element, summed in row-major order."""
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyTensorError("reduce_mean of an empty tensor")
    _check_finite(arr, "input")
    total = 0.0
    for v in arr.tolist():
        total += v
    return total / arr.size
