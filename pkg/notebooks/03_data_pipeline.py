# %% [markdown]
# From a city CSV to normalised sliding windows. A synthetic file stands
# in for the real dataset, with a few -99 sentinels punched into it.

# %%
import tempfile
from pathlib import Path

import numpy as np

from sfcast.data import (CitySeries, clean_series, parse_csv, prepare_datasets,
                         synthesize_series, write_csv)

tmp = Path(tempfile.mkdtemp())
s = synthesize_series(length=730, seed=1, noise_std=2.0, level=60.0)
vals = s.values.copy()
vals[[10, 11, 300]] = -99.0
write_csv(tmp / "city.csv", [CitySeries(s.key, s.dates, vals)])

# %%
records, stats = parse_csv(tmp / "city.csv")
print(stats.to_dict())
series = clean_series(records, "sinusoid-1", policy="interpolate")
print(len(series), "days, min", series.values.min().round(2))
print("filled day 10:", series.values[10].round(3), "between", vals[9].round(3), vals[12].round(3))

# %% split first, then statistics from the training part only
train_ds, test_ds = prepare_datasets(series, window=60, train_fraction=0.8)
print(train_ds.normalization, len(train_ds), len(test_ds))
print(train_ds.inputs.shape, train_ds.targets.shape)
print(np.allclose(test_ds.target_values()[:, 0], series.values[584 + 60:]))
