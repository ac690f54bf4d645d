"""Gumbel-Softmax sampling for differentiable categorical selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T

_EPS = 1e-20


@dataclass
class GumbelConfig:
    tau: float = 1.0
    straight_through: bool = False

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("temperature must be positive")


def sample_gumbel(rng, shape) -> np.ndarray:
    """Standard Gumbel noise via -log(-log(u)) with u uniform on (0, 1)."""
    u = rng.random(shape)
    return -np.log(-np.log(u + _EPS) + _EPS)


def gumbel_softmax(logits: T.Tensor, cfg: GumbelConfig, rng, noise=None) -> T.Tensor:
    """Sample relaxed categorical weights from unnormalized logits.

    Works on a 1-d logit vector or a (batch, k) matrix, softmaxing the last
    axis with max-subtraction for stability. Pass `noise` to reuse a frozen
    Gumbel draw (gradient checks, temperature comparisons). In
    straight-through mode the forward value is exactly one-hot at the
    argmax while gradients follow the soft sample.
    """
    k = logits.values.shape[-1]
    if k < 1:
        raise ValueError("need at least one category")
    if noise is None:
        noise = sample_gumbel(rng, logits.values.shape)
    perturbed = T.add(logits, T.Tensor(np.asarray(noise, dtype=logits.values.dtype)))
    z = T.softmax(T.scale(perturbed, 1.0 / cfg.tau), axis=-1)
    if cfg.straight_through:
        return T.straight_through_onehot(z)
    return z


def gumbel_softmax_values(logits, cfg: GumbelConfig, rng, noise=None) -> np.ndarray:
    """Convenience wrapper: plain-array logits in, plain-array weights out."""
    return gumbel_softmax(T.Tensor(np.asarray(logits, dtype=np.float64)), cfg, rng,
                          noise=noise).values
