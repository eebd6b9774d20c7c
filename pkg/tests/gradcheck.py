"""Central finite-difference gradient checker shared by the layer tests."""
import numpy as np

from risfb.nn.model import named_arrays


def _rel(a, b):
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def numeric_grad(f, arr, h):
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = arr[i]
        arr[i] = orig + h
        fp = f()
        arr[i] = orig - h
        fm = f()
        arr[i] = orig
        g[i] = (fp - fm) / (2 * h)
    return g


def check_layer(layer, x, rng, h=1e-6):
    """Return ``{name: relative error}`` for the input and every parameter.

    The scalar objective is ``sum(layer(x) * u)`` for a random upstream ``u``.
    """
    x = np.array(x, dtype=np.float64)
    up = rng.standard_normal(layer.forward(x, True).shape)

    def objective():
        return float(np.sum(layer.forward(x, True) * up))

    layer.forward(x, True)
    analytic_x = layer.backward(up)
    analytic_p = {name: lyr.grads[k].copy() for name, lyr, k in named_arrays(layer)}
    errors = {"input": _rel(numeric_grad(objective, x, h), analytic_x)}
    for name, lyr, k in named_arrays(layer):
        errors[name] = _rel(numeric_grad(objective, lyr.params[k], h), analytic_p[name])
    return errors
