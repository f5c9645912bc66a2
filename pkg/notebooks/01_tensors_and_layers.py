# %% [markdown]
# Tensors are plain float64 numpy arrays. Convolution goes through im2col,
# the LSTM is unrolled by hand, and every backward pass is checked against
# finite differences.

# %%
import numpy as np

from sfcast.gradcheck import check_layer
from sfcast.layers import init_layer
from sfcast.ndtensor import conv1d_valid, im2col

# %%
x = np.arange(6.0).reshape(6, 1)     # (T, C) for a single sample
print(im2col(x[None], 3)[0])     # one row per output step, K*C columns
k = np.array([1.0, 0.0, -1.0]).reshape(3, 1, 1)
print(conv1d_valid(x, k, np.zeros(1))[:, 0])   # valid: length 6-3+1

# %% shapes through a conv -> lstm stack
rng = np.random.default_rng(0)
conv = init_layer({"kind": "conv1d", "kernel_size": 5, "in_channels": 1, "filters": 60}, 0)
lstm = init_layer({"kind": "lstm", "in_features": 60, "units": 60, "return_sequences": True}, 1)
h = conv.forward(rng.normal(size=(4, 60, 1)))
print("conv ->", h.shape, " lstm ->", lstm.forward(h).shape)

# %% gradient checks
cases = {
    "dense": ({"kind": "dense", "in_features": 4, "units": 3, "activation": "relu"}, (5, 4)),
    "conv1d": ({"kind": "conv1d", "kernel_size": 3, "in_channels": 2, "filters": 3}, (2, 8, 2)),
    "lstm": ({"kind": "lstm", "in_features": 3, "units": 4}, (2, 6, 3)),
}
for name, (record, shape) in cases.items():
    layer = init_layer(record, 3)
    errs = check_layer(layer, rng.normal(size=shape), rng)
    print(f"{name:7s}", {k: f"{v:.1e}" for k, v in errs.items()})
