"""Comparison models: linear regression, CNN-only, LSTM-only, and the four-way run."""

import statistics
import traceback
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, UnderdeterminedError
from .model import _head, build_cnn_lstm, build_model
from .training import TrainConfig, evaluate, train

MODEL_NAMES = ("Linear Regression", "CNN", "LSTM", "CNN-LSTM")


@dataclass
class LinRegModel:
    coefficients: np.ndarray
    intercept: float
    normalization: object = None

    def predict(self, inputs):
        """Predict from (W, window, 1) normalised windows, returning data units."""
        x = np.asarray(inputs, dtype=np.float64)
        x = x.reshape(len(x), -1)
        if x.shape[1] != len(self.coefficients):
            raise ShapeError(f"windows of length {x.shape[1]}, model has "
                             f"{len(self.coefficients)} coefficients")
        z = (x @ self.coefficients + self.intercept).reshape(-1, 1)
        return z if self.normalization is None else self.normalization.invert(z)


def linreg_fit(ds, ridge_lambda=1e-8):
    """Least squares of targets on flattened windows plus intercept.

    Solves the normal equations ``(X'X + lambda*D) b = X'y`` where ``D`` is the
    identity on the window coefficients and 0 on the intercept.
    """
    x = ds.inputs.reshape(len(ds), -1)
    n, p = x.shape
    if n <= p:
        raise UnderdeterminedError(f"{n} windows cannot determine {p} coefficients + intercept")
    a = np.hstack([x, np.ones((n, 1))])
    y = ds.targets.ravel()
    gram = a.T @ a
    gram[np.arange(p), np.arange(p)] += ridge_lambda
    beta = np.linalg.solve(gram, a.T @ y)
    return LinRegModel(beta[:p].copy(), float(beta[p]), ds.normalization)


def build_cnn_only(seed=0, scale=1.0, offset=0.0, window=60, kernel_size=5, filters=60,
                   dense_units=(30, 10)):
    """Conv1D -> global average over time -> Dense(30) -> Dense(10) -> Dense(1) -> LambdaScale."""
    layers = [{"kind": "conv1d", "kernel_size": kernel_size, "filters": filters,
               "activation": "relu"},
              {"kind": "global_avg_pool"}]
    layers += _head(dense_units)
    layers.append({"kind": "lambda_scale", "scale": float(scale), "offset": float(offset)})
    creation = {"builder": "cnn_only", "window": window, "kernel_size": kernel_size,
                "filters": filters, "dense_units": list(dense_units)}
    return build_model(layers, seed, window, 1, {"creation": creation})


def build_lstm_only(seed=0, scale=1.0, offset=0.0, window=60, units=60, dense_units=(30, 10)):
    """LSTM(seq) -> LSTM(last) -> Dense(30) -> Dense(10) -> Dense(1) -> LambdaScale."""
    layers = [{"kind": "lstm", "units": units, "return_sequences": True},
              {"kind": "lstm", "units": units, "return_sequences": False}]
    layers += _head(dense_units)
    layers.append({"kind": "lambda_scale", "scale": float(scale), "offset": float(offset)})
    creation = {"builder": "lstm_only", "window": window, "units": units,
                "dense_units": list(dense_units)}
    return build_model(layers, seed, window, 1, {"creation": creation})


BUILDERS = {"CNN": build_cnn_only, "LSTM": build_lstm_only, "CNN-LSTM": build_cnn_lstm}


@dataclass
class ComparisonRow:
    model: str
    split_hash: str
    runs: list = field(default_factory=list)  # (seed, EvalReport) per successful run
    error: str = None

    @property
    def ok(self):
        return self.error is None and bool(self.runs)

    def _values(self, name):
        return [getattr(r, name) for _, r in self.runs]

    def mean(self, name):
        return statistics.fmean(self._values(name))

    def spread(self, name):
        vals = self._values(name)
        return statistics.pstdev(vals) if len(vals) > 1 else 0.0

    def to_dict(self):
        d = {"model": self.model, "split_hash": self.split_hash,
             "status": "ok" if self.ok else "failed"}
        if self.ok:
            for k in ("variance", "r2", "mae"):
                d[k] = self.mean(k)
                d[k + "_spread"] = self.spread(k)
            d["seeds"] = [s for s, _ in self.runs]
            d["runs"] = [dict(seed=s, **r.to_dict()) for s, r in self.runs]
        if self.error is not None:
            d["error"] = self.error
        return d


def _fit_one(name, train_ds, test_ds, config, seed, model_kwargs):
    if name == "Linear Regression":
        return evaluate(linreg_fit(train_ds), test_ds)
    model = BUILDERS[name](seed=seed, window=train_ds.window, **model_kwargs.get(name, {}))
    cfg = TrainConfig(**{**config.to_dict(), "seed": seed})
    train(model, train_ds, test_ds, cfg)
    return evaluate(model, test_ds)


def _task(args):
    name, train_ds, test_ds, config, seed, model_kwargs = args
    try:
        return name, seed, _fit_one(name, train_ds, test_ds, config, seed, model_kwargs), None
    except Exception as exc:  # one model failing must not abort the others
        return name, seed, None, "".join(traceback.format_exception_only(type(exc), exc)).strip()


def compare_models(train_ds, test_ds, config=None, seeds=(0,), models=MODEL_NAMES,
                   model_kwargs=None, workers=1):
    """Fit every model on the same split and score each on the test windows.

    Neural models are trained once per seed; linear regression is
    deterministic and fitted once. Rows carry the mean and population spread
    over seeds plus a hash of the (train, test) tensors they all consumed.
    ``workers > 1`` trains in a process pool; results are merged in a fixed
    order, so output does not depend on scheduling.
    """
    config = config or TrainConfig()
    model_kwargs = model_kwargs or {}
    split_hash = train_ds.content_hash()[:16] + ":" + test_ds.content_hash()[:16]
    tasks = []
    for name in models:
        for seed in ((seeds[0],) if name == "Linear Regression" else seeds):
            tasks.append((name, train_ds, test_ds, config, seed, model_kwargs))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]

    rows = {name: ComparisonRow(name, split_hash) for name in models}
    for name, seed, report, err in results:
        if err is not None:
            rows[name].error = f"seed {seed}: {err}"
        else:
            rows[name].runs.append((seed, report))
    return [rows[name] for name in models]


def render_table(rows):
    """Aligned text table: Model, Variance, R2 Score, MAE (mean +/- spread if several seeds)."""
    multi = any(len(r.runs) > 1 for r in rows)
    header = ["Model", "Variance", "R2 Score", "MAE"]
    body = []
    for r in rows:
        if not r.ok:
            body.append([r.model, "failed", "failed", "failed"])
            continue
        cells = [r.model]
        for k in ("variance", "r2", "mae"):
            cell = f"{r.mean(k):.3f}"
            if multi:
                cell += f" ± {r.spread(k):.3f}"
            cells.append(cell)
        body.append(cells)
    widths = [max(len(row[i]) for row in [header] + body) for i in range(4)]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                       for i, (c, w) in enumerate(zip(row, widths))) for row in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
