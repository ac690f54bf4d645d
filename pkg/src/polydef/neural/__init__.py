"""Differentiable computation substrate: tensors with reverse-mode
gradients, recurrent/gating/conv layers, Gumbel-Softmax sampling, Adam,
and finite-difference gradient checking."""

from . import tensor
from .gradcheck import grad_check
from .gumbel import GumbelConfig, gumbel_softmax, gumbel_softmax_values, sample_gumbel
from .layers import (
    CHAR_KERNELS,
    CHAR_OUT_WIDTH,
    char_cnn,
    dropout,
    gated_update,
    linear,
    lstm_forward,
    lstm_initial_state,
    lstm_step,
)
from .optim import Adam
from .params import ParamStore
from .tensor import Tensor, backward, constant

__all__ = [
    "tensor", "Tensor", "backward", "constant", "ParamStore", "Adam",
    "grad_check", "GumbelConfig", "gumbel_softmax", "gumbel_softmax_values",
    "sample_gumbel", "char_cnn", "dropout", "gated_update", "linear",
    "lstm_forward", "lstm_initial_state", "lstm_step", "CHAR_KERNELS",
    "CHAR_OUT_WIDTH",
]
