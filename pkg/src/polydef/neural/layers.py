"""Recurrent, gating, and convolutional building blocks.

All layers are functional: they fetch (or lazily create) their weights in
a ParamStore and assemble autodiff graphs over (batch, width) tensors.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .params import ParamStore

CHAR_KERNELS = ((2, 10), (3, 30), (4, 40), (5, 40), (6, 40))
CHAR_OUT_WIDTH = sum(f for _, f in CHAR_KERNELS)  # 160

# fixed character inventory: boundary pad, unknown, then common word characters
CHAR_INVENTORY = "abcdefghijklmnopqrstuvwxyz0123456789-'"
CHAR_PAD = 0
CHAR_UNK = 1
CHAR_INDEX = {c: i + 2 for i, c in enumerate(CHAR_INVENTORY)}
NUM_CHARS = len(CHAR_INVENTORY) + 2


def linear(store: ParamStore, name: str, x: T.Tensor, in_dim: int, out_dim: int,
           bias: bool = True) -> T.Tensor:
    w = store.add(f"{name}/W", (in_dim, out_dim))
    out = T.matmul(x, w)
    if bias:
        out = T.add(out, store.add(f"{name}/b", (out_dim,), init="zeros"))
    return out


def dropout(x: T.Tensor, rate: float, rng, train: bool) -> T.Tensor:
    """Inverted dropout; the identity in inference mode."""
    if not train or rate <= 0.0:
        return x
    mask = (rng.random(x.values.shape) >= rate) / (1.0 - rate)
    return T.mul(x, T.Tensor(mask.astype(x.values.dtype)))


def lstm_params(store: ParamStore, name: str, input_size: int, units: int, layers: int) -> None:
    for layer in range(layers):
        in_dim = input_size if layer == 0 else units
        store.add(f"{name}/l{layer}/W", (in_dim + units, 4 * units))
        store.add(f"{name}/l{layer}/b", (4 * units,), init="zeros")


def lstm_initial_state(store: ParamStore, batch: int, units: int, layers: int):
    zeros = np.zeros((batch, units), dtype=store.dtype)
    return [(T.Tensor(zeros), T.Tensor(zeros.copy())) for _ in range(layers)]


def lstm_step(store: ParamStore, name: str, x: T.Tensor, state, units: int,
              train: bool = False, dropout_rate: float = 0.5, rng=None, mask=None):
    """One step of a stacked LSTM.

    `state` is a list of (h, c) per layer. Dropout applies to the hidden
    output passed between layers, in training mode only. `mask` (batch, 1)
    freezes the state of padded rows so batches may mix sequence lengths.
    Returns (top hidden state, new state list).
    """
    new_state = []
    inp = x
    for layer, (h_prev, c_prev) in enumerate(state):
        w = store[f"{name}/l{layer}/W"]
        b = store[f"{name}/l{layer}/b"]
        gates = T.add(T.matmul(T.concat([inp, h_prev], axis=1), w), b)
        i_g, f_g, g_g, o_g = T.split_cols(gates, [units] * 4)
        i_g, f_g, o_g = T.sigmoid(i_g), T.sigmoid(f_g), T.sigmoid(o_g)
        c_new = T.add(T.mul(f_g, c_prev), T.mul(i_g, T.tanh(g_g)))
        h_new = T.mul(o_g, T.tanh(c_new))
        if mask is not None:
            keep = T.Tensor(mask.astype(store.dtype))
            drop = T.Tensor((1.0 - mask).astype(store.dtype))
            h_new = T.add(T.mul(keep, h_new), T.mul(drop, h_prev))
            c_new = T.add(T.mul(keep, c_new), T.mul(drop, c_prev))
        new_state.append((h_new, c_new))
        inp = h_new
        if layer < len(state) - 1:
            inp = dropout(inp, dropout_rate, rng, train)
    return new_state[-1][0], new_state


def lstm_forward(store: ParamStore, name: str, inputs, units: int = 300, layers: int = 2,
                 train: bool = False, dropout_rate: float = 0.5, rng=None,
                 state=None, masks=None):
    """Run a stacked LSTM over a sequence of (batch, width) tensors.

    Creates the weights on first use. Returns (list of top-layer hidden
    states, final state). All inputs must share their width.
    """
    inputs = list(inputs)
    if not inputs:
        raise ValueError("empty input sequence")
    width = inputs[0].values.shape[-1]
    for t in inputs:
        if t.values.shape[-1] != width:
            raise ValueError(f"input width mismatch: {t.values.shape[-1]} != {width}")
    lstm_params(store, name, width, units, layers)
    if state is None:
        state = lstm_initial_state(store, inputs[0].values.shape[0], units, layers)
    outputs = []
    for step, x in enumerate(inputs):
        mask = None if masks is None else masks[step]
        h_top, state = lstm_step(store, name, x, state, units, train=train,
                                 dropout_rate=dropout_rate, rng=rng, mask=mask)
        outputs.append(h_top)
    return outputs, state


def gated_update(store: ParamStore, name: str, v_star: T.Tensor, h_t: T.Tensor,
                 units: int):
    """Mix conditioning input into a decoder hidden state through two gates.

    An update gate z (width `units`) interpolates between the raw hidden
    state and a candidate state; a read gate r (width of v_star) rescales
    the conditioning vector before the candidate is formed. Returns
    (o_t, z_t, r_t) so gate activities can be dumped for inspection.
    """
    v_width = v_star.values.shape[-1]
    if h_t.values.shape[-1] != units:
        raise ValueError(f"hidden width {h_t.values.shape[-1]} != units {units}")
    both = T.concat([v_star, h_t], axis=1)
    z_t = T.sigmoid(linear(store, f"{name}/z", both, v_width + units, units))
    r_t = T.sigmoid(linear(store, f"{name}/r", both, v_width + units, v_width))
    gated_v = T.mul(r_t, v_star)
    h_tilde = T.tanh(linear(store, f"{name}/h", T.concat([gated_v, h_t], axis=1),
                            v_width + units, units))
    one = T.Tensor(np.ones((1,), dtype=store.dtype))
    o_t = T.add(T.mul(T.sub(one, z_t), h_t), T.mul(z_t, h_tilde))
    return o_t, z_t, r_t


def encode_chars(word: str) -> list[int]:
    return [CHAR_INDEX.get(c, CHAR_UNK) for c in word]


def char_cnn(store: ParamStore, name: str, word: str, emb_width: int = 300) -> T.Tensor:
    """Character-level convolutional affix features for one word.

    Embeds the characters, convolves with kernels of each configured length,
    max-pools over positions, and concatenates the pooled filters into a
    (1, 160) row. Words shorter than a kernel are padded with the boundary
    symbol; unknown characters map to a shared slot.
    """
    if not word:
        raise ValueError("empty word")
    ids = encode_chars(word)
    max_len = max(k for k, _ in CHAR_KERNELS)
    if len(ids) < max_len:
        ids = ids + [CHAR_PAD] * (max_len - len(ids))
    emb = store.add(f"{name}/emb", (NUM_CHARS, emb_width))
    chars = T.take_rows(emb, np.asarray(ids))  # (L, emb_width)
    length = len(ids)
    pooled = []
    for k, filters in CHAR_KERNELS:
        positions = length - k + 1
        window_idx = np.arange(positions)[:, None] + np.arange(k)[None, :]
        windows = T.reshape(T.take_rows(chars, window_idx), (positions, k * emb_width))
        w = store.add(f"{name}/k{k}/W", (k * emb_width, filters))
        b = store.add(f"{name}/k{k}/b", (filters,), init="zeros")
        conv = T.tanh(T.add(T.matmul(windows, w), b))
        pooled.append(T.reshape(T.max_axis(conv, axis=0), (1, filters)))
    return T.concat(pooled, axis=1)
