# %% [markdown]
# Train the CNN-LSTM on a synthetic year-scale series, save it, reload it
# and forecast one day ahead. SFCAST_EPOCHS sets the budget (default 10).

# %%
import os
import tempfile
from pathlib import Path

from sfcast.data import prepare_datasets, synthesize_series
from sfcast.model import build_cnn_lstm, load_model, save_model
from sfcast.training import TrainConfig, evaluate, train

epochs = int(os.environ.get("SFCAST_EPOCHS", "10"))
series = synthesize_series(length=1500, seed=0, noise_std=2.25)
train_ds, val_ds = prepare_datasets(series, window=60)
model = build_cnn_lstm(seed=0)

# %%
out = Path(tempfile.mkdtemp())
history = train(model, train_ds, val_ds, TrainConfig(epochs=epochs),
                on_epoch=lambda r: print(f"{r.epoch:3d} {r.train_mae:8.3f} {r.val_mae:8.3f}"),
                curve_path=out / "curve.csv")
print(history.final_report)

# %% the file round trip is bit-exact
save_model(model, out / "m.sfmodel.json")
again = load_model(out / "m.sfmodel.json")
print(evaluate(again, val_ds) == history.final_report)

# %% one-step forecast from the last 60 observed days
last = series.values[-60:]
z = val_ds.normalization.apply(last).reshape(1, 60, 1)
print("next day:", again.predict(z)[0, 0])
