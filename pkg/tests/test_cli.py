import json
import math

import numpy as np
import pytest

from sfcast.cli import main
from sfcast.data import prepare_datasets, synthesize_series, write_csv
from sfcast.model import build_model, load_model, save_model

TINY = ["--window", "10", "--kernel-size", "3", "--filters", "4", "--units", "4",
        "--dense-units", "3,2"]
SYNTH = ["--synthetic", "--length", "300", "--period", "40"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def train_tiny(capsys, name="m", *extra):
    return run(capsys, "--quiet", "train", *SYNTH, *TINY, "--epochs", "3", "--batch-size", "32",
               "--model-out", f"{name}.sfmodel.json", *extra)


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def test_ingest_stats_and_manifest(tmp_path, capsys):
    s = synthesize_series(length=25, seed=0, noise_std=1.0)
    write_csv(tmp_path / "d.csv", [s])
    code, out, _ = run(capsys, "--quiet", "ingest", "d.csv", "--stats-out", "out/stats.json")
    assert code == 2  # output directory does not exist
    (tmp_path / "out").mkdir()
    code, out, _ = run(capsys, "--quiet", "ingest", "d.csv", "--stats-out", "out/stats.json")
    assert code == 0
    stats = json.loads(out)
    assert stats["rows"] == 25 and stats["cities"] == 1
    assert json.loads((tmp_path / "out/stats.json").read_text()) == stats
    manifest = json.loads((tmp_path / "out/run-manifest.json").read_text())
    assert manifest["command"] == "ingest" and "d.csv" in manifest["inputs"]


def test_ingest_missing_column(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("Region,Country,State,City,Month,Day,Year\nA,B,C,D,1,1,2000\n")
    code, out, err = run(capsys, "ingest", "bad.csv")
    assert code == 2 and "AvgTemperature" in err and out == ""


def test_train_is_bit_identical_and_descends(tmp_path, capsys):
    for name in ("a", "b"):
        code, _, _ = train_tiny(capsys, name, "--seed", "7")
        assert code == 0
    for suffix in (".sfmodel.json", ".curve.csv"):
        assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()
    rows = (tmp_path / "a.curve.csv").read_text().splitlines()
    assert rows[0] == "epoch,train_mae,val_mae" and len(rows) == 4
    assert float(rows[1].split(",")[1]) > float(rows[-1].split(",")[1])


def test_flag_validation(capsys):
    with pytest.raises(SystemExit) as info:
        main(["train", "--synthetic", "--epochs", "0"])
    assert info.value.code == 2
    assert "--epochs" in capsys.readouterr().err
    code, _, err = run(capsys, "train", "--seed", "1")
    assert code == 2 and "--synthetic" in err


def test_quiet_stdout_is_pure_json(capsys):
    code, out, err = train_tiny(capsys, "q", "--seed", "3")
    assert code == 0
    payload = json.loads(out)
    assert payload["epochs"] == 3 and "epoch   1" in err


def test_evaluate_matches_training_report(tmp_path, capsys):
    _, out, _ = train_tiny(capsys, "m", "--seed", "5")
    final = json.loads(out)["final_val"]
    code, out, _ = run(capsys, "--quiet", "evaluate", "m.sfmodel.json", "--report-out", "r.json")
    assert code == 0 and json.loads(out) == final
    assert json.loads((tmp_path / "r.json").read_text()) == final


def test_evaluate_window_mismatch(capsys):
    train_tiny(capsys, "m", "--seed", "5")
    code, _, err = run(capsys, "evaluate", "m.sfmodel.json", "--window", "60")
    assert code == 2 and "window" in err


def recurrence_model(omega, window):
    # x_t = sum c_k x_{t-k} is exact for a sinusoid plus a linear trend:
    # characteristic polynomial (E^2 - 2cos(w)E + 1)(E - 1)^2
    poly = np.polymul([1.0, -2.0 * math.cos(omega), 1.0], [1.0, -2.0, 1.0])
    c = -poly[1:]  # c_1..c_4, coefficients sum to one
    w = np.zeros((window, 1))
    w[-4:, 0] = c[::-1]
    m = build_model([{"kind": "flatten"}, {"kind": "dense", "units": 1, "activation": "linear"},
                     {"kind": "lambda_scale"}], window=window)
    m.layers[1].params["weights"][...] = w
    m.layers[1].params["bias"][...] = 0.0
    return m


def test_evaluate_perfect_oracle(tmp_path, capsys):
    series = synthesize_series(length=600, noise_std=0.0, period=50.0, trend=0.01)
    tr, _ = prepare_datasets(series, window=12, train_fraction=0.8)
    m = recurrence_model(2 * math.pi / 50.0, 12)
    m.set_normalization(tr.normalization.mean, tr.normalization.std)
    save_model(m, tmp_path / "oracle.sfmodel.json")
    code, out, _ = run(capsys, "--quiet", "evaluate", "oracle.sfmodel.json", "--synthetic",
                       "--length", "600", "--noise-std", "0", "--period", "50", "--trend", "0.01")
    report = json.loads(out)
    assert code == 0
    assert report["mae"] < 1e-9 and abs(report["r2"] - 1.0) < 1e-12


def test_predict(capsys):
    train_tiny(capsys, "m", "--seed", "2")
    code, _, err = run(capsys, "predict", "m.sfmodel.json", "--input", ",".join(["1"] * 9))
    assert code == 2 and "expected 10" in err
    values = [float(v) for v in np.linspace(-3, 8, 10)]
    text = ",".join(map(repr, values))
    outs = [run(capsys, "--quiet", "predict", "m.sfmodel.json", f"--input={text}")[1]
            for _ in range(2)]
    assert outs[0] == outs[1]
    m = load_model("m.sfmodel.json")
    norm = m.metadata["normalization"]
    z = (np.array(values) - norm["mean"]) / norm["std"]
    assert float(outs[0]) == float(m.forward(z.reshape(1, 10, 1))[0, 0])


def test_predict_reference_window_count(capsys):
    m = build_model([{"kind": "flatten"}, {"kind": "dense", "units": 1, "activation": "linear"},
                     {"kind": "lambda_scale"}], window=60)
    m.set_normalization(10.0, 2.0)
    save_model(m, "w60.sfmodel.json")
    code, _, err = run(capsys, "predict", "w60.sfmodel.json", "--input", ",".join(["1"] * 59))
    assert code == 2 and "expected 60 input values, got 59" in err


def test_compare_with_seeds(tmp_path, capsys):
    code, out, err = run(capsys, "--quiet", "compare", *SYNTH, *TINY, "--epochs", "1",
                         "--batch-size", "32", "--seeds", "1,2", "--seed", "0",
                         "--table-out", "t.txt")
    assert code == 0
    rows = json.loads(out)["rows"]
    assert [r["model"] for r in rows] == ["Linear Regression", "CNN", "LSTM", "CNN-LSTM"]
    assert rows[3]["seeds"] == [1, 2] and "mae_spread" in rows[3]
    table = (tmp_path / "t.txt").read_text().splitlines()
    assert table[0].split() == ["Model", "Variance", "R2", "Score", "MAE"]
    assert "±" in table[2]


def test_non_finite_exit_code(capsys):
    code, _, err = train_tiny(capsys, "nan", "--seed", "1", "--lr", "1e300")
    assert code == 3 and "--lr" in err


def test_manifest_rerun_reproduces(tmp_path, capsys):
    code, _, err = train_tiny(capsys, "r")
    assert code == 0 and "no --seed given" in err
    manifest = json.loads((tmp_path / "run-manifest.json").read_text())
    assert isinstance(manifest["seed"], int)
    assert manifest["config"]["resolved_training"]["epochs"] == 3
    assert manifest["config"]["resolved_source"]["length"] == 300
    before = (tmp_path / "r.sfmodel.json").read_bytes()
    (tmp_path / "r.sfmodel.json").unlink()
    code, _, err = run(capsys, "rerun", "run-manifest.json", "--check")
    assert code == 0 and "bit-for-bit" in err
    assert (tmp_path / "r.sfmodel.json").read_bytes() == before


def test_train_from_csv_city(tmp_path, capsys):
    a = synthesize_series(length=200, seed=1, noise_std=1.0, period=40.0)
    b = synthesize_series(length=200, seed=2, noise_std=1.0, period=40.0)
    write_csv(tmp_path / "two.csv", [a, b])
    code, _, err = run(capsys, "train", "two.csv", *TINY, "--epochs", "1", "--seed", "0")
    assert code == 2 and "--city" in err
    code, out, _ = run(capsys, "--quiet", "train", "two.csv", "--city", "sinusoid-2", *TINY,
                       "--epochs", "1", "--seed", "0")
    assert code == 0
    final = json.loads(out)["final_val"]
    code, out, _ = run(capsys, "--quiet", "evaluate", "model.sfmodel.json", "two.csv")
    assert code == 0 and json.loads(out) == final
