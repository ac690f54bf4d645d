"""Adam optimizer over a ParamStore."""

from __future__ import annotations

import numpy as np

from .params import ParamStore


class Adam:
    def __init__(self, store: ParamStore, lr: float = 1e-3, betas=(0.9, 0.999),
                 eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self) -> None:
        """Apply one update from accumulated gradients, in sorted name order."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for name in sorted(self.store.params):
            p = self.store.params[name]
            if p.grad is None:
                continue
            g = np.asarray(p.grad, dtype=p.values.dtype)
            m = self._m.get(name)
            if m is None:
                m = np.zeros_like(p.values)
                self._m[name] = m
                self._v[name] = np.zeros_like(p.values)
            v = self._v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p.values -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
