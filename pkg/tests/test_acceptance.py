"""End-to-end acceptance checks, one summary line each.

The benchmark comparison trains three networks on three seeds; set
``SFCAST_BENCH_EPOCHS`` to change its epoch budget (default 15, full scale 50).
"""

import datetime as dt
import os

import numpy as np
import pytest

from sfcast.baselines import compare_models, linreg_fit, render_table
from sfcast.cli import main
from sfcast.data import (CitySeries, RawRecord, WindowedDataset, clean_series, make_windows,
                         prepare_datasets, synthesize_series)
from sfcast.gradcheck import check_layer, check_model
from sfcast.layers import init_layer
from sfcast.metrics import explained_variance, mae, r2_score
from sfcast.model import build_cnn_lstm, count_parameters, load_model, save_model
from sfcast.training import TrainConfig, mae_loss, train

BENCH_EPOCHS = int(os.environ.get("SFCAST_BENCH_EPOCHS", "15"))
BENCH_SEEDS = (0, 1, 2)

LAYERS = {
    "dense_relu": ({"kind": "dense", "in_features": 4, "units": 3, "activation": "relu"}, (5, 4)),
    "dense_linear": ({"kind": "dense", "in_features": 4, "units": 3}, (5, 4)),
    "dense_tanh": ({"kind": "dense", "in_features": 4, "units": 3, "activation": "tanh"}, (5, 4)),
    "dense_sigmoid": ({"kind": "dense", "in_features": 4, "units": 3,
                       "activation": "sigmoid"}, (5, 4)),
    "conv1d": ({"kind": "conv1d", "kernel_size": 3, "in_channels": 2, "filters": 3,
                "activation": "relu"}, (2, 8, 2)),
    "lstm_seq": ({"kind": "lstm", "in_features": 3, "units": 4, "return_sequences": True},
                 (2, 6, 3)),
    "lstm_last": ({"kind": "lstm", "in_features": 3, "units": 4}, (2, 6, 3)),
    "lambda_scale": ({"kind": "lambda_scale", "scale": 2.5, "offset": -1.0}, (3, 1)),
    "global_avg_pool": ({"kind": "global_avg_pool"}, (2, 5, 3)),
    "flatten": ({"kind": "flatten"}, (2, 5, 3)),
}
TINY = dict(window=8, kernel_size=3, filters=4, units=4, dense_units=(3, 2))


def test_architecture_fidelity(criterion):
    m = build_cnn_lstm(seed=0)
    counts = count_parameters(m)
    by_kind = [(r["kind"], r["params"]) for r in counts["layers"]]
    m.forward(np.zeros((1, 60, 1)))
    conv_shape = m.layers[0]._cache["out_shape"]
    ok = (by_kind[0] == ("conv1d", 360)
          and [p for k, p in by_kind if k == "dense"] == [1830, 310, 11]
          and conv_shape == (1, 56, 60)
          and len(counts["notes"]) == 2 and all("24840" in n for n in counts["notes"]))
    lstm = [p for k, p in by_kind if k == "lstm"]
    criterion("architecture fidelity", ok,
              f"conv {by_kind[0][1]}, dense {[p for k, p in by_kind if k == 'dense']}, "
              f"conv output {conv_shape[1:]}, lstm {lstm} (divergence noted)")


def test_gradient_suite(criterion):
    worst, elementwise = {}, 0.0
    for name, (record, shape) in LAYERS.items():
        for seed in range(20):
            rng = np.random.default_rng(seed)
            layer = init_layer(dict(record), seed)
            for p in layer.params.values():
                p[...] = rng.normal(scale=0.5, size=p.shape)
            errs = check_layer(layer, rng.normal(size=shape), rng)
            worst[name] = max(worst.get(name, 0.0), max(errs.values()))
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        m = build_cnn_lstm(seed=seed, scale=1.0 + rng.random(), offset=rng.normal(), **TINY)
        # zero biases behind a dead relu layer sit exactly on the kink, where a
        # central difference is not a derivative; jitter them off it
        for name, arr in m.named_parameters().items():
            if name.endswith("bias"):
                arr += rng.normal(scale=0.1, size=arr.shape)
        x, state = rng.normal(size=(2, 8, 1)), rng.bit_generator.state
        errs = check_model(m, x, rng)
        worst["model"] = max(worst.get("model", 0.0), max(errs.values()))
        rng.bit_generator.state = state  # same probe, elementwise measure
        elementwise = max(elementwise, max(check_model(m, x, rng, norm=False).values()))
    top = max(worst, key=worst.get)
    criterion("gradient suite", worst[top] < 1e-6,
              f"{len(LAYERS)} layer kinds + tiny model x 20 instances, "
              f"worst {worst[top]:.2e} ({top}); model check is norm-wise per parameter, "
              f"elementwise max {elementwise:.1e} for reference")


@pytest.mark.slow
def test_benchmark_ordering(criterion):
    series = synthesize_series(length=4000, seed=0, noise_std=0.15 * 15.0)
    tr, te = prepare_datasets(series, window=60, train_fraction=0.8)
    config = TrainConfig(epochs=BENCH_EPOCHS)
    rows = compare_models(tr, te, config, seeds=BENCH_SEEDS)
    print(render_table(rows))
    assert all(r.ok for r in rows), [r.error for r in rows]
    m = {r.model: r.mean("mae") for r in rows}
    r2 = {r.model: r.mean("r2") for r in rows}
    ok = m["CNN-LSTM"] <= m["LSTM"] < m["Linear Regression"] and r2["CNN-LSTM"] > 0.85
    criterion("benchmark ordering", ok,
              f"{BENCH_EPOCHS} epochs, seeds {list(BENCH_SEEDS)}: MAE CNN-LSTM "
              f"{m['CNN-LSTM']:.4f}, LSTM {m['LSTM']:.4f}, LinReg "
              f"{m['Linear Regression']:.4f}, CNN {m['CNN']:.4f} (not asserted); "
              f"CNN-LSTM R2 {r2['CNN-LSTM']:.4f}")


@pytest.mark.slow
def test_convergence_shape(criterion):
    # amplitude 300 puts the first-epoch error well above 20 in data units
    notes, ok = [], True
    for seed in (0, 1, 2):
        series = synthesize_series(length=1000, seed=seed, amplitude=300.0, noise_std=3.0)
        tr, te = prepare_datasets(series, window=60, train_fraction=0.8)
        h = train(build_cnn_lstm(seed=seed), tr, te,
                  TrainConfig(epochs=25, learning_rate=3e-4, seed=seed))
        v = np.array(h.val_mae)
        trailing = np.convolve(v, np.ones(5) / 5, mode="valid")
        rises = int((np.diff(trailing) > 0).sum())
        good = v[0] > 20 and v[-1] < 0.1 * v[0] and rises == 0
        ok &= bool(good)
        notes.append(f"seed {seed}: {v[0]:.1f} -> {v[-1]:.2f} ({v[-1] / v[0]:.3f}), "
                     f"{rises} rises in trailing 5-epoch mean")
    criterion("convergence shape", ok, "; ".join(notes))


def brute(p, t):
    n = len(t)
    mt = sum(t) / n
    ss_res = sum((a - b) ** 2 for a, b in zip(t, p))
    ss_tot = sum((a - mt) ** 2 for a in t)
    r = [a - b for a, b in zip(t, p)]
    mr = sum(r) / n
    ev = 1 - (sum((x - mr) ** 2 for x in r) / n) / (ss_tot / n)
    return 1 - ss_res / ss_tot, ev


def test_metric_definitions(criterion):
    rng = np.random.default_rng(2024)
    worst, ordered, exact = 0.0, True, True
    for _ in range(100):
        n = int(rng.integers(2, 60))
        t = rng.normal(size=n) * rng.uniform(0.1, 10)
        p = t + rng.normal(size=n) * rng.uniform(0.01, 3) + rng.normal()
        r2_ref, ev_ref = brute(p.tolist(), t.tolist())
        r2, ev = r2_score(p, t), explained_variance(p, t)
        worst = max(worst, abs(r2 - r2_ref), abs(ev - ev_ref))
        ordered &= r2 <= ev + 1e-12
        exact &= mae(p, t) == mae_loss(p.reshape(-1, 1), t.reshape(-1, 1))[0]
    criterion("metric definitions", worst < 1e-10 and ordered and exact,
              f"100 vectors, worst oracle gap {worst:.1e}, r2<=variance {ordered}, "
              f"mae==loss {exact}")


def test_pipeline_invariants(criterion, tmp_path):
    counts = all(len(make_windows(np.arange(float(L)), 60)) == L - 60 for L in range(61, 501))

    s = synthesize_series(length=600, seed=1, noise_std=2.0)
    tr, _ = prepare_datasets(s, 60, 0.8)
    shifted = CitySeries(s.key, s.dates, np.concatenate([s.values[:480], s.values[480:] + 1e6]))
    train_only = (prepare_datasets(shifted, 60, 0.8)[0].normalization == tr.normalization
                  and tr.normalization.mean == float(s.values[:480].mean()))

    rng = np.random.default_rng(3)
    vals = np.where(rng.random(400) < 0.2, -99.0, rng.normal(60, 20, 400))
    vals[[0, 150, 151, 152]] = 40.0
    days = [dt.date(2001, 1, 1) + dt.timedelta(days=i) for i in range(len(vals))]
    recs = [RawRecord("R", "C", "S", "X", d.month, d.day, d.year, float(v))
            for d, v in zip(days, vals)]
    cleaned = all((clean_series(recs, "X", policy).values > -90).all()
                  for policy in ("interpolate", "drop"))

    m = build_cnn_lstm(seed=4)
    m.set_normalization(55.5, 12.25)
    save_model(m, tmp_path / "m.sfmodel.json")
    back = load_model(tmp_path / "m.sfmodel.json")
    x = np.random.default_rng(0).normal(size=(3, 60, 1))
    round_trip = (back.parameter_vector().tobytes() == m.parameter_vector().tobytes()
                  and back.forward(x).tobytes() == m.forward(x).tobytes())

    outs = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        code = main(["--quiet", "train", "--synthetic", "--length", "400", "--window", "20",
                     "--kernel-size", "3", "--filters", "6", "--units", "6", "--dense-units",
                     "4,3", "--epochs", "3", "--seed", "11", "--model-out",
                     str(d / "e2e.sfmodel.json"), "--manifest-dir", str(d)])
        outs.append((code, (d / "e2e.sfmodel.json").read_bytes(), (d / "e2e.curve.csv").read_bytes()))
    identical = outs[0][0] == 0 and outs[0] == outs[1]

    ok = counts and train_only and cleaned and round_trip and identical
    criterion("pipeline invariants", ok,
              f"window counts {counts}, train-only stats {train_only}, sentinel cleaning "
              f"{cleaned}, round trip {round_trip}, end-to-end bit-identical {identical}")


def test_linreg_oracle(criterion):
    rng = np.random.default_rng(7)
    coef_err, ortho = 0.0, 0.0
    for _ in range(50):
        # targets are an exact linear map of sliding windows over a random series
        p = int(rng.integers(3, 61))
        n = int(rng.integers(300, 1001))
        x = make_windows(rng.normal(size=n + p), p).inputs[:, :, 0]
        beta, b0 = rng.normal(size=p), float(rng.normal())
        ds = WindowedDataset(x[:, :, None], (x @ beta + b0)[:, None])
        fit = linreg_fit(ds)
        coef_err = max(coef_err, np.abs(fit.coefficients - beta).max(), abs(fit.intercept - b0))
        y = x @ beta + b0 + rng.normal(size=n)
        fit = linreg_fit(WindowedDataset(x[:, :, None], y[:, None]))
        resid = y - (x @ fit.coefficients + fit.intercept)
        ortho = max(ortho, np.abs(np.hstack([x, np.ones((n, 1))]).T @ resid).max())
    criterion("linear-regression oracle", coef_err < 1e-8 and ortho < 1e-6,
              f"50 systems, worst coefficient error {coef_err:.1e}, "
              f"worst residual correlation {ortho:.1e}")
