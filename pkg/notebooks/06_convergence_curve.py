# %% [markdown]
# Validation MAE per epoch on a series scaled up to amplitude 300, so the
# early error is large in data units. Printed as a text sparkline; the CSV
# written next to it is what a plot would read.

# %%
import os
import tempfile
from pathlib import Path

import numpy as np

from sfcast.data import prepare_datasets, synthesize_series
from sfcast.model import build_cnn_lstm
from sfcast.training import TrainConfig, train

epochs = int(os.environ.get("SFCAST_EPOCHS", "25"))
series = synthesize_series(length=1000, seed=0, amplitude=300.0, noise_std=3.0)
tr, te = prepare_datasets(series, window=60)
path = Path(tempfile.mkdtemp()) / "curve.csv"
h = train(build_cnn_lstm(seed=0), tr, te,
          TrainConfig(epochs=epochs, learning_rate=3e-4), curve_path=path)

# %%
v = np.array(h.val_mae)
for epoch, val in enumerate(v, start=1):
    print(f"{epoch:3d} {val:8.2f} " + "#" * int(60 * val / v.max()))
print("final / first:", round(v[-1] / v[0], 3))
print(path.read_text().splitlines()[:3])
