"""Regression scores reported per model: explained variance, R^2 and MAE."""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyTensorError, ShapeError, ZeroVarianceError
from .ndtensor import reduce_mean


@dataclass(frozen=True)
class EvalReport:
    variance: float
    r2: float
    mae: float

    def to_dict(self):
        return asdict(self)


def _pair(pred, target, min_len=1):
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(target, dtype=np.float64).ravel()
    if p.size != t.size:
        raise ShapeError(f"prediction length {p.size} != target length {t.size}")
    if p.size == 0:
        raise EmptyTensorError("metrics need at least one prediction")
    if p.size < min_len:
        raise ShapeError(f"need at least {min_len} values, got {p.size}")
    return p, t


def _target_ss(t):
    ss = float(((t - t.mean()) ** 2).sum())
    if ss == 0.0:
        raise ZeroVarianceError("target has zero variance; score is undefined")
    return ss


def mae(pred, target):
    p, t = _pair(pred, target)
    return reduce_mean(np.abs(p - t))


def r2_score(pred, target):
    """1 - SS_res / SS_tot."""
    p, t = _pair(pred, target, 2)
    ss_tot = _target_ss(t)
    return 1.0 - float(((t - p) ** 2).sum()) / ss_tot


def explained_variance(pred, target):
    """1 - Var(target - pred) / Var(target), population variances.

    Ignores any constant bias in the predictions, so it is never below R^2.
    """
    p, t = _pair(pred, target, 2)
    ss_tot = _target_ss(t)
    resid = t - p
    return 1.0 - float(((resid - resid.mean()) ** 2).sum()) / ss_tot


def score(pred, target):
    return EvalReport(variance=explained_variance(pred, target), r2=r2_score(pred, target),
                      mae=mae(pred, target))
