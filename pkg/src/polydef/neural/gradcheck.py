"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .params import ParamStore


def grad_check(build_loss, store: ParamStore, eps: float = 1e-5,
               max_coords_per_param: int | None = None, seed: int = 0) -> float:
    """Compare analytic gradients against central differences.

    `build_loss` is a zero-argument callable that assembles a scalar loss
    graph from the store's current parameter values; it must be
    deterministic (freeze any sampling noise outside it). Checks every
    coordinate, or a seeded sample of `max_coords_per_param` per parameter.
    Returns the max relative error, |analytic - numeric| / max(1, |a|, |n|).

    Requires a float64 store: 32-bit roundoff swamps the eps**2 truncation
    error of central differences.
    """
    if store.dtype != np.float64:
        raise ValueError("gradient checking requires a float64 parameter store")
    store.zero_grads()
    loss = build_loss()
    if loss.values.size != 1:
        raise ValueError("build_loss must return a scalar")
    T.backward(loss)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in sorted(store.params):
        param = store.params[name]
        analytic = param.grad if param.grad is not None else np.zeros_like(param.values)
        flat = param.values.reshape(-1)
        grad_flat = np.asarray(analytic).reshape(-1)
        n = flat.size
        if max_coords_per_param is not None and n > max_coords_per_param:
            coords = rng.choice(n, size=max_coords_per_param, replace=False)
        else:
            coords = range(n)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = build_loss().item()
            flat[i] = orig - eps
            f_minus = build_loss().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = grad_flat[i]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if err > worst:
                worst = err
    return float(worst)
