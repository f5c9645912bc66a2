"""Layer kinds with Glorot initialisation, cached forward and exact backward.

Every layer is described by a plain ``dict`` record (``{"kind": "dense",
"in_features": 60, "units": 30, "activation": "relu"}``) so model specs
serialise to JSON as-is. ``init_layer(record, seed)`` turns a record into a
layer object; the object holds its parameters, the gradients from the last
backward pass, and the forward cache that backward consumes.

Shapes exclude the batch axis in records and include it at run time:
sequence layers take (B, T, C), vector layers take (B, F).
"""

import numpy as np

from .errors import InvalidDimensionError, MissingCacheError, ShapeError, WindowTooLongError
from .ndtensor import activation_grad, col2im, im2col

# gate blocks along the 4U axis of every LSTM weight matrix
LSTM_GATES = ("input", "forget", "candidate", "output")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "linear":
        return z
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        return _sigmoid(z)
    raise InvalidDimensionError(f"unsupported activation {kind!r}")


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _positive(record, *names):
    for name in names:
        value = record.get(name)
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
            raise InvalidDimensionError(
                f"{record.get('kind')} layer needs positive integer {name!r}, got {value!r}")


class Layer:
    """Base class; subclasses define ``kind``, ``forward`` and ``backward``."""

    kind = None
    input_rank = None  # 2 for (T, C) sequences, 1 for flat vectors

    def __init__(self, record, rng=None):
        self.record = dict(record)
        self.params = {}
        self.grads = {}
        self._cache = None

    def parameter_count(self):
        return int(sum(p.size for p in self.params.values()))

    def output_shape(self, input_shape):
        raise NotImplementedError

    def zero_grads(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def clear_cache(self):
        self._cache = None

    def _check_input(self, x, expected):
        if x.ndim != len(expected) + 1 or any(
                e is not None and s != e for s, e in zip(x.shape[1:], expected)):
            want = "(B, " + ", ".join("*" if e is None else str(e) for e in expected) + ")"
            raise ShapeError(f"{self.kind} layer expects input {want}, got {x.shape}")

    def _cached(self, grad_out):
        if self._cache is None:
            raise MissingCacheError(f"{self.kind} backward called without a forward cache")
        out_shape = self._cache["out_shape"]
        if grad_out.shape != out_shape:
            raise ShapeError(
                f"{self.kind} grad_out shape {grad_out.shape} != forward output {out_shape}")
        return self._cache

    def __repr__(self):
        return f"{type(self).__name__}({self.record})"


class DenseLayer(Layer):
    kind = "dense"
    input_rank = 1

    def __init__(self, record, rng=None):
        super().__init__(record)
        _positive(record, "in_features", "units")
        if record.get("activation", "linear") not in ("relu", "linear", "tanh", "sigmoid"):
            raise InvalidDimensionError(f"unsupported dense activation {record['activation']!r}")
        self.record.setdefault("activation", "linear")
        n_in, n_out = record["in_features"], record["units"]
        rng = rng or np.random.default_rng(0)
        self.params = {
            "weights": glorot_uniform(rng, (n_in, n_out), n_in, n_out),
            "bias": np.zeros(n_out),
        }

    def output_shape(self, input_shape):
        return (self.record["units"],)

    def forward(self, x):
        self._check_input(x, (self.record["in_features"],))
        act = self.record["activation"]
        out = _act(x @ self.params["weights"] + self.params["bias"], act)
        self._cache = {"x": x, "out": out, "out_shape": out.shape}
        return out

    def backward(self, grad_out):
        cache = self._cached(grad_out)
        dz = grad_out * activation_grad(cache["out"], self.record["activation"])
        self.grads = {"weights": cache["x"].T @ dz, "bias": dz.sum(axis=0)}
        return dz @ self.params["weights"].T, self.grads


class Conv1DLayer(Layer):
    kind = "conv1d"
    input_rank = 2

    def __init__(self, record, rng=None):
        super().__init__(record)
        _positive(record, "kernel_size", "in_channels", "filters")
        self.record.setdefault("activation", "relu")
        if self.record["activation"] not in ("relu", "linear"):
            raise InvalidDimensionError(f"unsupported conv activation {record['activation']!r}")
        K, c_in, F = record["kernel_size"], record["in_channels"], record["filters"]
        rng = rng or np.random.default_rng(0)
        self.params = {
            "kernels": glorot_uniform(rng, (K, c_in, F), K * c_in, K * F),
            "bias": np.zeros(F),
        }

    def output_shape(self, input_shape):
        T, _ = input_shape
        K = self.record["kernel_size"]
        if T < K:
            raise WindowTooLongError(f"kernel of length {K} does not fit input of length {T}")
        return (T - K + 1, self.record["filters"])

    def forward(self, x):
        self._check_input(x, (None, self.record["in_channels"]))
        K = self.record["kernel_size"]
        if x.shape[1] < K:
            raise WindowTooLongError(
                f"kernel of length {K} does not fit input of length {x.shape[1]}")
        cols = im2col(x, K)
        kern = self.params["kernels"].reshape(-1, self.record["filters"])
        out = _act(cols @ kern + self.params["bias"], self.record["activation"])
        self._cache = {"cols": cols, "T": x.shape[1], "out": out, "out_shape": out.shape}
        return out

    def backward(self, grad_out):
        cache = self._cached(grad_out)
        K, F = self.record["kernel_size"], self.record["filters"]
        dz = grad_out * activation_grad(cache["out"], self.record["activation"])
        cols = cache["cols"]
        dk = cols.reshape(-1, cols.shape[-1]).T @ dz.reshape(-1, F)
        self.grads = {"kernels": dk.reshape(self.params["kernels"].shape),
                      "bias": dz.sum(axis=(0, 1))}
        dcols = dz @ self.params["kernels"].reshape(-1, F).T
        return col2im(dcols, K, cache["T"]), self.grads


class LSTMLayer(Layer):
    """Forget-gate LSTM without peepholes, zero initial state.

    Weight columns are laid out in blocks of ``units`` in the order
    input, forget, candidate, output.
    """

    kind = "lstm"
    input_rank = 2

    def __init__(self, record, rng=None):
        super().__init__(record)
        _positive(record, "in_features", "units")
        self.record["return_sequences"] = bool(record.get("return_sequences", False))
        n_in, U = record["in_features"], record["units"]
        rng = rng or np.random.default_rng(0)
        bias = np.zeros(4 * U)
        bias[U:2 * U] = 1.0
        self.params = {
            "input_weights": glorot_uniform(rng, (n_in, 4 * U), n_in, 4 * U),
            "recurrent_weights": glorot_uniform(rng, (U, 4 * U), U, 4 * U),
            "bias": bias,
        }

    def output_shape(self, input_shape):
        T, _ = input_shape
        U = self.record["units"]
        return (T, U) if self.record["return_sequences"] else (U,)

    def _gate_scaling(self):
        # sigmoid(z) = 0.5 + 0.5*tanh(z/2): one tanh over all four blocks per step
        U = self.record["units"]
        s = np.full(4 * U, 0.5)
        s[2 * U:3 * U] = 1.0
        return s

    def forward(self, x):
        self._check_input(x, (None, self.record["in_features"]))
        B, T, _ = x.shape
        U = self.record["units"]
        s = self._gate_scaling()
        mul, add = s.copy(), np.where(s == 0.5, 0.5, 0.0)
        R = self.params["recurrent_weights"] * s
        xw = (x.transpose(1, 0, 2) @ self.params["input_weights"] + self.params["bias"]) * s
        gates = np.empty((T, B, 4 * U))
        cells = np.empty((T, B, U))
        tanh_c = np.empty((T, B, U))
        hs = np.empty((T, B, U))
        h = np.zeros((B, U))
        c = np.zeros((B, U))
        for t in range(T):
            a = gates[t]
            np.tanh(xw[t] + h @ R, out=a)
            a *= mul
            a += add
            c = a[:, U:2 * U] * c + a[:, :U] * a[:, 2 * U:3 * U]
            cells[t] = c
            tc = tanh_c[t]
            np.tanh(c, out=tc)
            h = hs[t]
            np.multiply(a[:, 3 * U:], tc, out=h)
        out = hs.transpose(1, 0, 2) if self.record["return_sequences"] else hs[-1].copy()
        self._cache = {"x": x, "gates": gates, "cells": cells, "tanh_c": tanh_c, "hs": hs,
                       "out_shape": out.shape}
        return np.ascontiguousarray(out)

    def backward(self, grad_out):
        cache = self._cached(grad_out)
        x, gates, cells, tanh_c, hs = (cache[k] for k in ("x", "gates", "cells", "tanh_c", "hs"))
        B, T, n_in = x.shape
        U = self.record["units"]
        RT = self.params["recurrent_weights"].T.copy()
        i, f, g, o = (gates[:, :, k * U:(k + 1) * U] for k in range(4))
        c_prev = np.zeros_like(cells)
        c_prev[1:] = cells[:-1]
        # loop-invariant factors: d(pre-activation)/d(cell grad) for the i, f, g blocks,
        # and the two paths from dh into the output gate and the cell
        ifg = np.empty((T, B, 3, U))
        ifg[:, :, 0] = g * i * (1.0 - i)
        ifg[:, :, 1] = c_prev * f * (1.0 - f)
        ifg[:, :, 2] = i * (1.0 - g * g)
        to_o = tanh_c * o * (1.0 - o)
        to_c = o * (1.0 - tanh_c * tanh_c)
        f = np.ascontiguousarray(f)
        if self.record["return_sequences"]:
            dh_seq = np.ascontiguousarray(grad_out.transpose(1, 0, 2))
        else:
            dh_seq = np.zeros((T, B, U))
            dh_seq[-1] = grad_out
        dZ = np.empty((T, B, 4 * U))
        dh_next = np.zeros((B, U))
        dc = np.zeros((B, U))
        for t in range(T - 1, -1, -1):
            dh = dh_seq[t] + dh_next
            dz = dZ[t]
            np.multiply(dh, to_o[t], out=dz[:, 3 * U:])
            dc *= f[t + 1] if t + 1 < T else 0.0
            dc += dh * to_c[t]
            np.multiply(ifg[t], dc[:, None, :], out=dz[:, :3 * U].reshape(B, 3, U))
            dh_next = dz @ RT
        flat_dz = dZ.reshape(-1, 4 * U)
        h_prev = np.zeros_like(hs)
        h_prev[1:] = hs[:-1]
        self.grads = {
            "input_weights": x.transpose(1, 0, 2).reshape(-1, n_in).T @ flat_dz,
            "recurrent_weights": h_prev.reshape(-1, U).T @ flat_dz,
            "bias": flat_dz.sum(axis=0),
        }
        dx = dZ @ self.params["input_weights"].T
        return np.ascontiguousarray(dx.transpose(1, 0, 2)), self.grads


class LambdaScale(Layer):
    """Fixed affine map ``scale * x + offset``; used to denormalise outputs."""

    kind = "lambda_scale"
    input_rank = None

    def __init__(self, record, rng=None):
        super().__init__(record)
        self.record.setdefault("scale", 1.0)
        self.record.setdefault("offset", 0.0)
        self.set(self.record["scale"], self.record["offset"])

    def set(self, scale, offset):
        scale, offset = float(scale), float(offset)
        if not (np.isfinite(scale) and np.isfinite(offset)) or scale == 0.0:
            raise InvalidDimensionError(
                f"lambda scale must be finite and nonzero, offset finite; got {scale}, {offset}")
        self.record["scale"], self.record["offset"] = scale, offset

    @property
    def scale(self):
        return self.record["scale"]

    @property
    def offset(self):
        return self.record["offset"]

    def output_shape(self, input_shape):
        return tuple(input_shape)

    def forward(self, x):
        out = self.scale * x + self.offset
        self._cache = {"out_shape": out.shape}
        return out

    def inverse(self, y):
        return (y - self.offset) / self.scale

    def backward(self, grad_out):
        self._cached(grad_out)
        self.grads = {}
        return self.scale * grad_out, self.grads


class GlobalAvgPool(Layer):
    """Mean over the time axis: (B, T, C) -> (B, C)."""

    kind = "global_avg_pool"
    input_rank = 2

    def output_shape(self, input_shape):
        return (input_shape[1],)

    def forward(self, x):
        if x.ndim != 3:
            raise ShapeError(f"global_avg_pool expects (B, T, C) input, got {x.shape}")
        out = x.mean(axis=1)
        self._cache = {"T": x.shape[1], "out_shape": out.shape}
        return out

    def backward(self, grad_out):
        cache = self._cached(grad_out)
        T = cache["T"]
        g = np.repeat(grad_out[:, None, :] / T, T, axis=1)
        return g, {}


class Flatten(Layer):
    """(B, T, C) -> (B, T*C), row-major."""

    kind = "flatten"
    input_rank = 2

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x):
        if x.ndim != 3:
            raise ShapeError(f"flatten expects (B, T, C) input, got {x.shape}")
        out = x.reshape(x.shape[0], -1)
        self._cache = {"in_shape": x.shape, "out_shape": out.shape}
        return out

    def backward(self, grad_out):
        cache = self._cached(grad_out)
        return grad_out.reshape(cache["in_shape"]), {}


LAYER_KINDS = {cls.kind: cls for cls in
               (DenseLayer, Conv1DLayer, LSTMLayer, LambdaScale, GlobalAvgPool, Flatten)}


def init_layer(record, seed=0):
    """Instantiate a layer record with parameters drawn from ``seed``.

    Weights are Glorot-uniform, biases zero, LSTM forget-gate bias 1.0.
    """
    kind = record.get("kind")
    if kind not in LAYER_KINDS:
        raise InvalidDimensionError(f"unknown layer kind {kind!r}; known: {sorted(LAYER_KINDS)}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return LAYER_KINDS[kind](record, rng)


def parameter_count(record):
    """Trainable parameter count implied by a (resolved) layer record."""
    kind = record["kind"]
    if kind == "dense":
        return record["in_features"] * record["units"] + record["units"]
    if kind == "conv1d":
        return record["kernel_size"] * record["in_channels"] * record["filters"] + record["filters"]
    if kind == "lstm":
        n_in, U = record["in_features"], record["units"]
        return 4 * (n_in * U + U * U + U)
    return 0
