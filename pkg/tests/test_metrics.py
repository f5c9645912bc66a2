import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfcast.errors import ShapeError, ZeroVarianceError
from sfcast.metrics import explained_variance, mae, r2_score, score
from sfcast.training import mae_loss


def brute_r2(p, t):
    m = sum(t) / len(t)
    return 1 - sum((a - b) ** 2 for a, b in zip(t, p)) / sum((a - m) ** 2 for a in t)


def brute_ev(p, t):
    r = [a - b for a, b in zip(t, p)]
    mr, mt = sum(r) / len(r), sum(t) / len(t)
    return 1 - (sum((x - mr) ** 2 for x in r) / len(r)) / (sum((x - mt) ** 2 for x in t) / len(t))


def test_mae_examples():
    assert mae([1.0, 2.0], [1.0, 2.0]) == 0
    assert mae([1, 2], [2, 4]) == 1.5
    with pytest.raises(ShapeError):
        mae([1, 2], [1])


def test_r2_examples():
    t = [1.0, 3.0, 2.0, 7.0]
    assert r2_score(t, t) == 1.0
    assert r2_score([np.mean(t)] * 4, t) == 0.0
    assert r2_score([1, 2, 3], [1, 2, 4]) == pytest.approx(11 / 14, abs=1e-15)
    with pytest.raises(ZeroVarianceError):
        r2_score([1, 2], [3, 3])


def test_explained_variance_examples():
    t = np.array([1.0, 3.0, 2.0, 7.0])
    assert explained_variance(t, t) == 1.0
    assert explained_variance(t + 2.5, t) == pytest.approx(1.0, abs=1e-15)
    assert r2_score(t + 2.5, t) < 1.0


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    t, p = rng.normal(size=n), rng.normal(size=n) + rng.normal()
    assert abs(r2_score(p, t) - brute_r2(p.tolist(), t.tolist())) < 1e-10
    assert abs(explained_variance(p, t) - brute_ev(p.tolist(), t.tolist())) < 1e-10
    assert r2_score(p, t) <= explained_variance(p, t) + 1e-12
    perm = rng.permutation(n)
    rep, rep_perm = score(p, t), score(p[perm], t[perm])
    assert rep_perm.mae == pytest.approx(rep.mae, abs=1e-12)
    assert rep_perm.r2 == pytest.approx(rep.r2, abs=1e-12)
    assert rep_perm.variance == pytest.approx(rep.variance, abs=1e-12)
    c = rng.normal() * 10
    assert mae(p + c, t + c) == pytest.approx(mae(p, t), abs=1e-12)


def test_mae_matches_loss_exactly():
    rng = np.random.default_rng(0)
    p, t = rng.normal(size=(33, 1)), rng.normal(size=(33, 1))
    assert mae(p, t) == mae_loss(p, t)[0]
