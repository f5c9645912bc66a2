"""Central finite-difference checks for layer and model gradients.

The scalar probed is ``sum(output * R)`` for a fixed random ``R``, so every
output element contributes to the checked gradient.
"""

import numpy as np


def rel_error(analytic, numeric, floor=1e-8):
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def norm_rel_error(analytic, numeric, floor=1e-8):
    """Whole-tensor ``||a - n|| / max(||a||, ||n||, floor)``.

    Unlike the elementwise form this is not dominated by finite-difference
    rounding (~1e-12 absolute) on gradient entries that are themselves tiny.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    return float(np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n), floor))


def _numeric_grad(f, arr, eps):
    # fourth-order central stencil: truncation O(eps^4), so eps can stay large
    # enough that rounding in f does not swamp small gradient entries
    g = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        vals = []
        for step in (2.0, 1.0, -1.0, -2.0):
            flat[i] = orig + step * eps
            vals.append(f())
        flat[i] = orig
        # differences first, so a flat f gives exactly zero
        gflat[i] = (8.0 * (vals[1] - vals[2]) - (vals[0] - vals[3])) / (12.0 * eps)
    return g


def check_layer(layer, x, rng, eps=1e-4, norm=False):
    """Max relative error over the input and every parameter of ``layer``.

    Elementwise by default; ``norm=True`` uses :func:`norm_rel_error`.
    """
    x = np.array(x, dtype=np.float64)
    probe = rng.normal(size=layer.forward(x).shape)
    grad_in, grad_params = layer.backward(probe)
    grad_in = grad_in.copy()
    grad_params = {k: v.copy() for k, v in grad_params.items()}

    def f():
        return float((layer.forward(x) * probe).sum())

    measure = norm_rel_error if norm else (lambda a, n: float(rel_error(a, n).max()))
    errors = {"input": measure(grad_in, _numeric_grad(f, x, eps))}
    for name, arr in layer.params.items():
        errors[name] = measure(grad_params[name], _numeric_grad(f, arr, eps))
    return errors


def check_model(model, x, rng, eps=1e-4, norm=True):
    """Relative error per named parameter for a whole model (norm-wise by default)."""
    x = np.array(x, dtype=np.float64)
    probe = rng.normal(size=model.forward(x).shape)
    grads = {k: v.copy() for k, v in model.backward(probe).items()}

    def f():
        return float((model.forward(x) * probe).sum())

    measure = norm_rel_error if norm else (lambda a, n: float(rel_error(a, n).max()))
    return {name: measure(grads[name], _numeric_grad(f, arr, eps))
            for name, arr in model.named_parameters().items()}
