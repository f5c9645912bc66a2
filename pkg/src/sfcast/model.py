"""Sequential models: spec validation, builders, forward/backward, model files."""

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (ChecksumError, InvalidDimensionError, MalformedFileError, ShapeError,
                     VersionMismatchError)
from .layers import LAYER_KINDS, LambdaScale, init_layer, parameter_count

FORMAT_VERSION = 1
MODEL_SUFFIX = ".sfmodel.json"

# per-LSTM count in the published architecture table; a 60->60 forget-gate LSTM has 29040
PUBLISHED_LSTM_PARAMS = 24840


@dataclass
class ModelSpec:
    """Ordered layer records plus the input window geometry."""

    layers: list
    input_window: int = 60
    input_features: int = 1

    def to_dict(self):
        return {"input_window": self.input_window, "input_features": self.input_features,
                "layers": copy.deepcopy(self.layers)}

    @classmethod
    def from_dict(cls, d):
        return cls(layers=copy.deepcopy(d["layers"]), input_window=int(d["input_window"]),
                   input_features=int(d["input_features"]))


def resolve_spec(spec):
    """Chain shapes through the layers, filling in input dimensions.

    Returns a new spec whose records carry every dimension explicitly.
    Raises ShapeError when adjacent shapes do not fit, including explicit
    ``in_features``/``in_channels`` values that disagree with the chain.
    """
    if spec.input_window < 1 or spec.input_features < 1:
        raise InvalidDimensionError("input_window and input_features must be positive")
    shape = (spec.input_window, spec.input_features)
    resolved = []
    for idx, rec in enumerate(spec.layers):
        rec = dict(rec)
        kind = rec.get("kind")
        cls = LAYER_KINDS.get(kind)
        if cls is None:
            raise InvalidDimensionError(f"layer {idx}: unknown kind {kind!r}")
        if cls.input_rank is not None and len(shape) != cls.input_rank:
            raise ShapeError(f"layer {idx} ({kind}) needs a rank-{cls.input_rank} input, "
                             f"previous layer emits {shape}")
        key = {"dense": "in_features", "lstm": "in_features", "conv1d": "in_channels"}.get(kind)
        if key is not None:
            have = shape[-1]
            if key in rec and rec[key] != have:
                raise ShapeError(f"layer {idx} ({kind}) declares {key}={rec[key]} but receives "
                                 f"{have} from the previous layer")
            rec[key] = have
        shape = init_layer(rec, 0).output_shape(shape)
        resolved.append(rec)
    if shape != (1,):
        raise ShapeError(f"forecasting models must end in a (1,) output, spec ends in {shape}")
    return ModelSpec(resolved, spec.input_window, spec.input_features)


class Model:
    """An instantiated :class:`ModelSpec` with its layers and metadata."""

    def __init__(self, spec, seed=0, metadata=None):
        self.spec = resolve_spec(spec)
        self.seed = seed
        self.layers = [init_layer(rec, np.random.default_rng([seed, i]))
                       for i, rec in enumerate(self.spec.layers)]
        self.metadata = dict(metadata or {})
        self.metadata.setdefault("normalization", None)

    # -- parameters -------------------------------------------------------

    def named_parameters(self):
        """Live parameter arrays keyed ``"<index>.<kind>.<name>"``."""
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params.items():
                out[f"{i:02d}.{layer.kind}.{name}"] = arr
        return out

    def named_grads(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                out[f"{i:02d}.{layer.kind}.{name}"] = layer.grads[name]
        return out

    def parameter_vector(self):
        params = self.named_parameters()
        return np.concatenate([params[k].ravel() for k in params]) if params else np.zeros(0)

    def zero_parameters(self):
        for arr in self.named_parameters().values():
            arr[...] = 0.0

    @property
    def lambda_layer(self):
        last = self.layers[-1]
        return last if isinstance(last, LambdaScale) else None

    def set_normalization(self, mean, std):
        """Record z-score statistics and point the output LambdaScale at them."""
        self.metadata["normalization"] = {"mean": float(mean), "std": float(std)}
        if self.lambda_layer is not None:
            self.lambda_layer.set(std, mean)
            self.spec.layers[-1]["scale"] = float(std)
            self.spec.layers[-1]["offset"] = float(mean)

    # -- computation ------------------------------------------------------

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        want = (self.spec.input_window, self.spec.input_features)
        if x.ndim != 3 or x.shape[1:] != want:
            raise ShapeError(f"model expects input (B, {want[0]}, {want[1]}), got {x.shape}")
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_out):
        """Back-propagate ``dLoss/dOutput``; returns gradients keyed like parameters."""
        g = np.asarray(grad_out, dtype=np.float64)
        for layer in reversed(self.layers):
            g, _ = layer.backward(g)
        self.input_grad = g
        return self.named_grads()

    def predict(self, x, batch_size=512):
        """Forward pass in chunks, without keeping caches around."""
        x = np.asarray(x, dtype=np.float64)
        outs = [self.forward(x[i:i + batch_size]) for i in range(0, len(x), batch_size)]
        for layer in self.layers:
            layer.clear_cache()
        return np.concatenate(outs, axis=0)

    def clone(self):
        return copy.deepcopy(self)

    def __repr__(self):
        kinds = " -> ".join(layer.kind for layer in self.layers)
        return f"Model({kinds}, seed={self.seed})"


def build_model(layers, seed=0, window=60, features=1, metadata=None):
    return Model(ModelSpec(list(layers), window, features), seed=seed, metadata=metadata)


def _head(dense_units):
    recs = [{"kind": "dense", "units": u, "activation": "relu"} for u in dense_units]
    recs.append({"kind": "dense", "units": 1, "activation": "linear"})
    return recs


def build_cnn_lstm(seed=0, scale=1.0, offset=0.0, window=60, kernel_size=5, filters=60,
                   units=60, dense_units=(30, 10), conv_blocks=1):
    """Conv1D -> LSTM(seq) -> LSTM(last) -> Dense(30) -> Dense(10) -> Dense(1) -> LambdaScale.

    Defaults give the reference architecture on a 60x1 window. ``conv_blocks=2``
    stacks a second, identically sized Conv1D block.
    """
    layers = [{"kind": "conv1d", "kernel_size": kernel_size, "filters": filters,
               "activation": "relu"} for _ in range(conv_blocks)]
    layers += [{"kind": "lstm", "units": units, "return_sequences": True},
               {"kind": "lstm", "units": units, "return_sequences": False}]
    layers += _head(dense_units)
    layers.append({"kind": "lambda_scale", "scale": float(scale), "offset": float(offset)})
    creation = {"builder": "cnn_lstm", "window": window, "kernel_size": kernel_size,
                "filters": filters, "units": units, "dense_units": list(dense_units),
                "conv_blocks": conv_blocks}
    return build_model(layers, seed, window, 1, {"creation": creation})


def count_parameters(model):
    """Per-layer and total trainable parameter counts, with notes on LSTM layers."""
    rows, notes = [], []
    for i, (rec, layer) in enumerate(zip(model.spec.layers, model.layers)):
        n = layer.parameter_count()
        assert n == parameter_count(rec)
        rows.append({"index": i, "kind": layer.kind, "params": n})
        if layer.kind == "lstm":
            notes.append(
                f"layer {i} (lstm, {rec['in_features']}->{rec['units']}): {n} parameters "
                f"= 4*({rec['in_features']}*{rec['units']} + {rec['units']}^2 + {rec['units']}); "
                f"the published table lists {PUBLISHED_LSTM_PARAMS}, which no standard LSTM "
                f"parameterisation of these sizes produces")
    return {"layers": rows, "total": sum(r["params"] for r in rows), "notes": notes}


# -- model files ----------------------------------------------------------

def _checksum(doc):
    body = {k: v for k, v in doc.items() if k != "checksum"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return "sha256:" + hashlib.sha256(blob.encode("utf-8")).hexdigest()


def model_to_document(model):
    params = {name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
              for name, arr in model.named_parameters().items()}
    doc = {
        "format_version": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "normalization": model.metadata.get("normalization"),
        "seed": model.seed,
        "metadata": {k: v for k, v in model.metadata.items() if k != "normalization"},
        "parameters": params,
    }
    doc["checksum"] = _checksum(doc)
    return doc


def model_from_document(doc):
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise MalformedFileError("not a model document: format_version missing")
    if doc["format_version"] != FORMAT_VERSION:
        raise VersionMismatchError(
            f"model file version {doc['format_version']!r}, this build reads {FORMAT_VERSION}")
    try:
        expected = doc["checksum"]
        spec = ModelSpec.from_dict(doc["spec"])
        params = doc["parameters"]
        seed = doc["seed"]
        metadata = dict(doc.get("metadata") or {})
        metadata["normalization"] = doc.get("normalization")
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFileError(f"model document is missing fields: {exc}") from exc
    if _checksum(doc) != expected:
        raise ChecksumError("model file checksum does not match its contents")
    model = Model(spec, seed=seed, metadata=metadata)
    live = model.named_parameters()
    if set(live) != set(params):
        raise MalformedFileError("parameter names do not match the layer spec")
    for name, arr in live.items():
        entry = params[name]
        data = np.asarray(entry["data"], dtype=np.float64)
        if list(entry["shape"]) != list(arr.shape) or data.size != arr.size:
            raise MalformedFileError(f"parameter {name}: shape {entry['shape']} does not "
                                     f"match spec shape {list(arr.shape)}")
        arr[...] = data.reshape(arr.shape)
    return model


def save_model(model, path):
    """Write a versioned, checksummed JSON model file.

    Floats go through ``repr`` (shortest round-trip) so a reload is bit-exact.
    """
    doc = model_to_document(model)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, allow_nan=False), encoding="utf-8")
    tmp.replace(path)
    return path


def load_model(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
        doc = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedFileError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_document(doc)

