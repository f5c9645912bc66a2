"""Temperature forecasting with a CNN-LSTM and baselines, on numpy alone."""

__version__ = "0.1.0"

from .baselines import (build_cnn_only, build_lstm_only, compare_models, linreg_fit,
                        render_table)
from .data import (clean_series, make_windows, normalize, parse_csv, prepare_datasets,
                   synthesize_series)
from .metrics import EvalReport, explained_variance, mae, r2_score, score
from .model import (Model, build_cnn_lstm, build_model, count_parameters, load_model,
                    save_model)
from .training import TrainConfig, evaluate, train

__all__ = [
    "EvalReport", "Model", "TrainConfig", "build_cnn_lstm", "build_cnn_only",
    "build_lstm_only", "build_model", "clean_series", "compare_models", "count_parameters",
    "evaluate", "explained_variance", "linreg_fit", "load_model", "mae", "make_windows",
    "normalize", "parse_csv", "prepare_datasets", "r2_score", "render_table", "save_model",
    "score", "synthesize_series", "train",
]
