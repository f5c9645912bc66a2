"""MAE loss, Adam, the mini-batch training loop and evaluation."""

import csv
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, LayoutMismatchError, NonFiniteLossError, ShapeError
from .metrics import score
from .ndtensor import reduce_mean


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True
    patience: int = None

    def validate(self, n_samples=None):
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise ConfigError(f"epochs must be an integer >= 1, got {self.epochs!r}")
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ConfigError(f"batch_size must be an integer >= 1, got {self.batch_size!r}")
        if n_samples is not None and self.batch_size > n_samples:
            raise ConfigError(f"batch_size {self.batch_size} exceeds the {n_samples} "
                              "training windows")
        # zero is allowed: it freezes the parameters, which is useful as a control
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ConfigError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ConfigError("adam needs 0 <= beta1, beta2 < 1 and eps > 0")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience must be >= 1 when given")
        return self

    def to_dict(self):
        return asdict(self)


def mae_loss(pred, target):
    """Mean absolute error and its (sub)gradient w.r.t. ``pred``; sign(0) = 0."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 2 or pred.shape[1] != 1 or len(pred) < 1:
        raise ShapeError(f"mae_loss expects matching (B, 1) arrays, got {pred.shape} "
                         f"and {target.shape}")
    diff = pred - target
    return reduce_mean(np.abs(diff)), np.sign(diff) / len(pred)


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state, t, config):
    """One bias-corrected Adam update, in place. ``t`` is the 1-based step index."""
    if set(params) != set(grads):
        raise LayoutMismatchError("params and grads have different names")
    if t < 1:
        raise ValueError("adam step index starts at 1")
    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.eps
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise LayoutMismatchError(f"{name}: grad shape {g.shape} != param shape {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        if m.shape != p.shape:
            raise LayoutMismatchError(f"{name}: moment shape {m.shape} != param shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    state.t = t
    return params, state


@dataclass
class EpochRecord:
    epoch: int
    train_mae: float
    val_mae: float
    wall_time: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    steps: int = 0
    final_report: object = None

    @property
    def train_mae(self):
        return [r.train_mae for r in self.records]

    @property
    def val_mae(self):
        return [r.val_mae for r in self.records]

    def __len__(self):
        return len(self.records)


class CurveWriter:
    """Appends ``epoch,train_mae,val_mae`` rows, flushing after each epoch."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh)
        self._w.writerow(["epoch", "train_mae", "val_mae"])
        self._fh.flush()

    def __call__(self, record):
        self._w.writerow([record.epoch, repr(record.train_mae), repr(record.val_mae)])
        self._fh.flush()

    def close(self):
        self._fh.close()


def evaluate(model, ds):
    """Score a model (anything with ``predict``) on a windowed dataset, in data units."""
    pred = model.predict(ds.inputs)
    target = ds.target_values()
    if pred.shape != target.shape:
        raise ShapeError(f"predictions {pred.shape} do not match targets {target.shape}")
    return score(pred, target)


def train(model, train_ds, val_ds, config=None, on_epoch=None, curve_path=None):
    """Fit ``model`` with mini-batch Adam on MAE; returns the per-epoch history.

    The model's output LambdaScale is pointed at the training normalisation
    first, so losses and both curves are in data units. ``on_epoch`` is
    called with each :class:`EpochRecord` as soon as it is complete.
    """
    config = (config or TrainConfig()).validate(len(train_ds))
    want = (model.spec.input_window, model.spec.input_features)
    for name, ds in (("train", train_ds), ("val", val_ds)):
        if ds.inputs.shape[1:] != want:
            raise ShapeError(f"{name} windows have shape {ds.inputs.shape[1:]}, "
                             f"model expects {want}")
    if train_ds.normalization is not None:
        model.set_normalization(train_ds.normalization.mean, train_ds.normalization.std)

    callbacks = [cb for cb in (on_epoch,) if cb is not None]
    writer = CurveWriter(curve_path) if curve_path is not None else None
    if writer is not None:
        callbacks.append(writer)

    rng = np.random.default_rng(config.seed)
    params = model.named_parameters()
    state = AdamState()
    x_all, y_all = train_ds.inputs, train_ds.target_values()
    n = len(train_ds)
    history = TrainHistory()
    best, stale = math.inf, 0
    try:
        for epoch in range(1, config.epochs + 1):
            start = time.perf_counter()
            order = rng.permutation(n) if config.shuffle else np.arange(n)
            total = 0.0
            for lo in range(0, n, config.batch_size):
                idx = order[lo:lo + config.batch_size]
                with np.errstate(over="ignore", invalid="ignore"):
                    pred = model.forward(x_all[idx])
                if not np.isfinite(pred).all():
                    raise NonFiniteLossError(epoch, float("nan"))
                loss, grad = mae_loss(pred, y_all[idx])
                grads = model.backward(grad)
                history.steps += 1
                adam_step(params, grads, state, history.steps, config)
                total += loss * len(idx)
            with np.errstate(over="ignore", invalid="ignore"):
                val_pred = model.predict(val_ds.inputs)
            if not np.isfinite(val_pred).all():
                raise NonFiniteLossError(epoch, float("nan"))
            val = reduce_mean(np.abs(val_pred - val_ds.target_values()))
            rec = EpochRecord(epoch, total / n, val, time.perf_counter() - start)
            history.records.append(rec)
            for cb in callbacks:
                cb(rec)
            if config.patience is not None:
                if val < best:
                    best, stale = val, 0
                else:
                    stale += 1
                    if stale >= config.patience:
                        break
    finally:
        if writer is not None:
            writer.close()
    history.final_report = evaluate(model, val_ds)
    return history
