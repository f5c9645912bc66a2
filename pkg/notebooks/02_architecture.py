# %% [markdown]
# The reference network on a 60x1 window, with per-layer parameter counts.

# %%
import numpy as np

from sfcast.model import build_cnn_lstm, count_parameters

model = build_cnn_lstm(seed=0)
counts = count_parameters(model)
x = np.zeros((1, 60, 1))
model.forward(x)
for row, layer in zip(counts["layers"], model.layers):
    print(f"{row['kind']:13s} {str(layer._cache['out_shape'][1:]):10s} {row['params']:>6d}")
print("total", counts["total"])

# %% the LSTM rows do not match the published table; the note says why
for note in counts["notes"]:
    print(note)
