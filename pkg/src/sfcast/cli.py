"""``sfcast`` command line: ingest, train, evaluate, predict, compare, rerun.

Exit codes: 0 ok, 1 internal error, 2 bad input or configuration, 3 numerical
failure. With ``--quiet`` stdout carries only the JSON (or single number)
payload and all human-readable text goes to stderr.
"""

import argparse
import datetime as dt
import hashlib
import json
import os
import re
import secrets
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import (BUILDERS, MODEL_NAMES, build_cnn_only, build_lstm_only, compare_models,
                        render_table)
from .data import (NormStats, chronological_split, clean_series, make_windows, parse_csv,
                   prepare_datasets, synthesize_series)
from .errors import ConfigError, SfcastError
from .model import MODEL_SUFFIX, build_cnn_lstm, count_parameters, load_model, save_model
from .training import TrainConfig, evaluate, train

MANIFEST_NAME = "run-manifest.json"
ARCHS = {"cnn-lstm": build_cnn_lstm, "cnn": build_cnn_only, "lstm": build_lstm_only}
SYNTH_DEFAULTS = {"length": 4000, "noise_std": 2.25, "amplitude": 15.0, "period": 365.0,
                  "trend": 0.001, "level": 0.0}


class _Console:
    def __init__(self, quiet):
        self.quiet = quiet

    def say(self, text):
        print(text, file=sys.stderr if self.quiet else sys.stdout, flush=True)

    def warn(self, text):
        print(text, file=sys.stderr, flush=True)

    def payload(self, obj):
        if isinstance(obj, str):
            print(obj, flush=True)
        else:
            print(json.dumps(obj, indent=2, sort_keys=True), flush=True)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- argument types -----------------------------------------------------------

def positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"must be an integer >= 1, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be an integer >= 1, got {value}")
    return value


def nonneg_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not np.isfinite(value) or value < 0:
        raise argparse.ArgumentTypeError(f"must be finite and >= 0, got {value}")
    return value


def fraction(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {value}")
    return value


def seed_list(text):
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not seeds or len(set(seeds)) != len(seeds):
        raise argparse.ArgumentTypeError(f"expected distinct comma-separated integers, got {text!r}")
    return seeds


def int_list(text):
    try:
        return [positive_int(s) for s in text.split(",")]
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError(f"expected comma-separated positive integers, got {text!r}")


# -- data sources -------------------------------------------------------------

def _synthetic_params(args, recorded=None):
    params = dict(SYNTH_DEFAULTS)
    params.update(recorded or {})
    for key in SYNTH_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return params


def load_series(args, seed, recorded=None):
    """Return ``(series, source_record, input_hashes)`` for a csv path or ``--synthetic``."""
    recorded = recorded or {}
    if args.csv_path is not None and args.synthetic:
        raise ConfigError("give either a CSV path or --synthetic, not both")
    if args.csv_path is None and not args.synthetic:
        if recorded.get("kind") == "synthetic":
            args.synthetic = True
        else:
            raise ConfigError("no data: give a CSV path or --synthetic")
    if args.synthetic:
        base = recorded if recorded.get("kind") == "synthetic" else {}
        params = _synthetic_params(args, {k: base[k] for k in SYNTH_DEFAULTS if k in base})
        data_seed = base.get("seed", seed) if args.data_seed is None else args.data_seed
        series = synthesize_series(seed=data_seed, **params)
        args.resolved_source = {"kind": "synthetic", "seed": data_seed, **params}
        return series, args.resolved_source, {}
    path = Path(args.csv_path)
    records, stats = parse_csv(path, args.sentinel)
    city = args.city or (recorded.get("city") if recorded.get("kind") == "csv" else None)
    if city is None:
        keys = {r.key for r in records}
        if len(keys) != 1:
            raise ConfigError(f"{path} holds {len(keys)} cities; choose one with --city")
        city = next(iter(keys))
    series = clean_series(records, city, args.missing, args.sentinel)
    source = {"kind": "csv", "path": str(path), "city": "/".join(series.key),
              "missing": args.missing, "sentinel": args.sentinel}
    args.resolved_source = source
    return series, source, {str(path): sha256_file(path)}


def _add_source_args(p):
    p.add_argument("csv_path", nargs="?", default=None,
                   help="city temperature CSV")
    p.add_argument("--synthetic", action="store_true",
                   help="use a seeded sinusoid + trend + noise series instead of a CSV")
    p.add_argument("--city", help="city name, or Region/Country/State/City suffix if ambiguous")
    p.add_argument("--missing", choices=("interpolate", "drop"), default="interpolate")
    p.add_argument("--sentinel", type=float, default=-90.0,
                   help="readings at or below this are missing (default -90)")
    g = p.add_argument_group("synthetic series")
    g.add_argument("--length", type=positive_int)
    g.add_argument("--noise-std", type=nonneg_float)
    g.add_argument("--amplitude", type=float)
    g.add_argument("--period", type=float)
    g.add_argument("--trend", type=float)
    g.add_argument("--level", type=float)
    g.add_argument("--data-seed", type=int, help="noise seed (defaults to --seed)")


def _add_train_args(p):
    p.add_argument("--window", type=positive_int, default=60)
    p.add_argument("--epochs", type=positive_int, default=50)
    p.add_argument("--batch-size", type=positive_int, default=64)
    p.add_argument("--lr", type=nonneg_float, default=1e-3)
    p.add_argument("--split", type=fraction, default=0.8, help="training fraction (default 0.8)")
    p.add_argument("--kernel-size", type=positive_int, default=5)
    p.add_argument("--filters", type=positive_int, default=60)
    p.add_argument("--units", type=positive_int, default=60)
    p.add_argument("--dense-units", type=int_list, default=[30, 10])


def _arch_kwargs(args, arch):
    kw = {"kernel_size": args.kernel_size, "filters": args.filters, "units": args.units,
          "dense_units": tuple(args.dense_units)}
    if arch in ("cnn", "CNN"):
        kw.pop("units")
    if arch in ("lstm", "LSTM"):
        kw.pop("kernel_size")
        kw.pop("filters")
    return kw


def _train_config(args, seed):
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                         learning_rate=args.lr, seed=seed)
    args.resolved_training = config.to_dict()
    return config


def _model_norm(model):
    norm = model.metadata.get("normalization")
    if not norm:
        raise ConfigError("model file carries no normalisation statistics; "
                          "was it produced by `sfcast train`?")
    return NormStats(norm["mean"], norm["std"])


# -- commands -----------------------------------------------------------------
# each returns (outputs, inputs) where both map a role or path to a file path / hash

def cmd_ingest(args, seed, con):
    records, stats = parse_csv(args.csv_path, args.sentinel)
    for line, why in stats.bad_rows:
        con.warn(f"skipped line {line}: {why}")
    out = stats.to_dict()
    out["skipped_rows"] = len(stats.bad_rows)
    con.payload(out)
    outputs = {}
    if args.stats_out:
        _write_json(args.stats_out, out)
        outputs["stats"] = args.stats_out
    return outputs, {args.csv_path: sha256_file(args.csv_path)}


def cmd_train(args, seed, con):
    series, source, inputs = load_series(args, seed)
    train_ds, val_ds = prepare_datasets(series, args.window, args.split)
    model = ARCHS[args.arch](seed=seed, window=args.window, **_arch_kwargs(args, args.arch))
    config = _train_config(args, seed)
    model.metadata["training"] = {"source": source, "window": args.window, "split": args.split,
                                  "config": config.to_dict(), "arch": args.arch}
    model_out = Path(args.model_out)
    curve_out = Path(args.curve_out) if args.curve_out else model_out.with_name(
        model_out.name.removesuffix(MODEL_SUFFIX) + ".curve.csv")
    con.say(f"{args.arch}: {count_parameters(model)['total']} parameters, "
            f"{len(train_ds)} training / {len(val_ds)} validation windows")

    def progress(rec):
        con.say(f"epoch {rec.epoch:3d}  train_mae {rec.train_mae:.4f}  "
                f"val_mae {rec.val_mae:.4f}  ({rec.wall_time:.1f}s)")

    history = train(model, train_ds, val_ds, config, on_epoch=progress, curve_path=curve_out)
    save_model(model, model_out)
    con.payload({"model": str(model_out), "curve": str(curve_out), "epochs": len(history),
                 "steps": history.steps, "final_val": history.final_report.to_dict()})
    return {"model": str(model_out), "curve": str(curve_out)}, inputs


def _eval_dataset(args, model, seed):
    info = model.metadata.get("training", {})
    window = model.spec.input_window
    if args.window is not None and args.window != window:
        raise ConfigError(f"--window {args.window} does not match the model's input window "
                          f"{window}")
    split = args.split if args.split is not None else info.get("split", 0.8)
    series, source, inputs = load_series(args, seed, info.get("source"))
    _, test = chronological_split(series, split)
    stats = _model_norm(model)
    return make_windows(stats.apply(test.values), window, 1, stats), source, inputs


def cmd_evaluate(args, seed, con):
    model = load_model(args.model_path)
    ds, source, inputs = _eval_dataset(args, model, seed)
    inputs[args.model_path] = sha256_file(args.model_path)
    report = evaluate(model, ds).to_dict()
    con.say(f"{len(ds)} windows from {source['kind']} data")
    con.payload(report)
    outputs = {}
    if args.report_out:
        _write_json(args.report_out, report)
        outputs["report"] = args.report_out
    return outputs, inputs


def _read_values(text):
    inputs = {}
    if os.path.isfile(text):
        inputs[text] = sha256_file(text)
        text = Path(text).read_text(encoding="utf-8")
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"--input holds a non-numeric value: {exc}") from exc
    if not all(np.isfinite(values)):
        raise ConfigError("--input values must be finite")
    return values, inputs


def cmd_predict(args, seed, con):
    model = load_model(args.model_path)
    values, inputs = _read_values(args.input)
    inputs[args.model_path] = sha256_file(args.model_path)
    window = model.spec.input_window
    if len(values) != window:
        raise ConfigError(f"expected {window} input values, got {len(values)}")
    stats = _model_norm(model)
    x = stats.apply(values).reshape(1, window, 1)
    con.payload(repr(float(model.predict(x)[0, 0])))
    return {}, inputs


def cmd_compare(args, seed, con):
    series, source, inputs = load_series(args, seed)
    train_ds, test_ds = prepare_datasets(series, args.window, args.split)
    seeds = args.seeds or [seed]
    kwargs = {name: _arch_kwargs(args, name) for name in BUILDERS}
    con.say(f"comparing {', '.join(MODEL_NAMES)} over seeds {seeds}")
    rows = compare_models(train_ds, test_ds, _train_config(args, seed), seeds=seeds,
                          model_kwargs=kwargs, workers=args.workers)
    table = render_table(rows)
    con.say(table)
    for r in rows:
        if not r.ok:
            con.warn(f"{r.model} failed: {r.error}")
    con.payload({"source": source, "rows": [r.to_dict() for r in rows]})
    outputs = {}
    if args.table_out:
        Path(args.table_out).write_text(table + "\n", encoding="utf-8")
        outputs["table"] = args.table_out
    if args.json_out:
        _write_json(args.json_out, {"source": source, "rows": [r.to_dict() for r in rows]})
        outputs["rows"] = args.json_out
    if not any(r.ok for r in rows):
        raise _AllFailed("every model failed")
    return outputs, inputs


class _AllFailed(Exception):
    pass


# -- manifest and rerun -------------------------------------------------------

def _manifest_dir(args, outputs):
    if args.manifest_dir:
        return Path(args.manifest_dir)
    for path in outputs.values():
        return Path(path).resolve().parent
    return Path.cwd()


def write_manifest(args, argv, seed, outputs, inputs, started):
    manifest = {
        "sfcast_version": __version__,
        "numpy_version": np.__version__,
        "command": args.command,
        "argv": argv,
        "cwd": os.getcwd(),
        "seed": seed,
        "config": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "quiet")},
        "inputs": inputs,
        "outputs": {role: {"path": str(p), "sha256": sha256_file(p)}
                    for role, p in outputs.items()},
        "started": started,
        "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
    }
    path = _manifest_dir(args, outputs) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(path, manifest)
    return path


def cmd_rerun(args, con):
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    argv = list(manifest["argv"])
    if args.quiet and "--quiet" not in argv:
        argv.insert(0, "--quiet")
    old = os.getcwd()
    os.chdir(manifest["cwd"])
    try:
        code = main(argv)
        if code != 0 or not args.check:
            return code
        mismatched = [role for role, o in manifest["outputs"].items()
                      if sha256_file(o["path"]) != o["sha256"]]
    finally:
        os.chdir(old)
    if mismatched:
        con.warn("outputs differ from the manifest: " + ", ".join(mismatched))
        return 1
    con.warn(f"reproduced {len(manifest['outputs'])} output file(s) bit-for-bit")
    return 0


# -- parser -------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="machine-readable payload only on stdout")
    common.add_argument("--seed", type=int, help="single source of randomness; "
                        "a random one is chosen and recorded when omitted")
    common.add_argument("--manifest-dir", help=f"where to write {MANIFEST_NAME} "
                        "(default: beside the outputs)")

    parser = argparse.ArgumentParser(prog="sfcast", description="CNN-LSTM temperature forecasting")
    parser.add_argument("--quiet", action="store_true", default=False)
    parser.add_argument("--version", action="version", version=f"sfcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse a CSV and report statistics")
    p.add_argument("csv_path")
    p.add_argument("--sentinel", type=float, default=-90.0)
    p.add_argument("--stats-out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="train a model and write it with its curve")
    _add_source_args(p)
    _add_train_args(p)
    p.add_argument("--arch", choices=sorted(ARCHS), default="cnn-lstm")
    p.add_argument("--model-out", default="model" + MODEL_SUFFIX)
    p.add_argument("--curve-out", help="epoch,train_mae,val_mae CSV (default: beside the model)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score a model file on held-out windows")
    p.add_argument("model_path")
    _add_source_args(p)
    p.add_argument("--window", type=positive_int, help="must match the model's window if given")
    p.add_argument("--split", type=fraction, help="default: the split the model was trained on")
    p.add_argument("--report-out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", parents=[common], help="forecast the next value from one window")
    p.add_argument("model_path")
    p.add_argument("--input", required=True,
                   help="comma-separated values in data units, or a file holding them "
                        "(write --input=-1,2,... when the first value is negative)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", parents=[common], help="LinReg, CNN, LSTM and CNN-LSTM side by side")
    _add_source_args(p)
    _add_train_args(p)
    p.add_argument("--seeds", type=seed_list, help="training seeds, e.g. 1,2,3 (default: --seed)")
    p.add_argument("--workers", type=positive_int, default=1)
    p.add_argument("--table-out")
    p.add_argument("--json-out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("rerun", help=f"re-execute the command recorded in a {MANIFEST_NAME}")
    p.add_argument("manifest")
    p.add_argument("--check", action="store_true",
                   help="exit 1 unless every output file is reproduced bit-for-bit")
    p.set_defaults(func=None)
    return parser


def exit_code_for(exc):
    if isinstance(exc, FloatingPointError):
        return 3
    if isinstance(exc, (SfcastError, OSError)):
        return 2
    return 1


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    con = _Console(args.quiet)
    if args.command == "rerun":
        return cmd_rerun(args, con)
    started = dt.datetime.now(dt.timezone.utc).isoformat()
    seed = args.seed
    replay = argv
    if seed is None:
        seed = secrets.randbelow(2**31)
        replay = argv + ["--seed", str(seed)]
        if args.command in ("train", "compare"):
            con.warn(f"no --seed given; using {seed} (recorded in the manifest)")
    args.seed = seed
    try:
        outputs, inputs = args.func(args, seed, con)
        path = write_manifest(args, replay, seed, outputs, inputs, started)
        con.say(f"manifest: {path}")
        return 0
    except _AllFailed as exc:
        con.warn(f"error: {exc}")
        return 1
    except Exception as exc:
        code = exit_code_for(exc)
        con.warn(f"error: {exc}")
        if code == 3:
            con.warn("hint: the loss diverged; lower --lr or check the data for extreme values")
        if code == 1:
            traceback.print_exc(file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
