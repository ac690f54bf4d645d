"""Standard gradient-audit battery.

Builds each differentiable subsystem in 64-bit precision with frozen
sampling noise and compares analytic gradients against central finite
differences. Used by the grad-check command and the acceptance suite.
"""

from __future__ import annotations

import numpy as np

from .define import TrainConfig, _batch_loss, build_model
from .match import encode_definition
from .neural import tensor as T
from .neural.gradcheck import grad_check
from .neural.gumbel import GumbelConfig, gumbel_softmax, sample_gumbel
from .neural.layers import char_cnn, gated_update, linear, lstm_forward
from .neural.params import ParamStore
from .synthetic import two_sense_corpus
from .vocab import TokenVocab


def run_gradient_suite(seed: int = 0, eps: float = 1e-5,
                       coords_per_param: int = 4) -> dict[str, float]:
    """Run every graph in the battery; returns name -> max relative error."""
    results = {}
    rng = np.random.default_rng(seed)

    # stacked LSTM over a short sequence
    store = ParamStore(seed=seed, dtype=np.float64)
    xs = [T.Tensor(rng.standard_normal((4, 8))) for _ in range(5)]

    def lstm_loss():
        outs, state = lstm_forward(store, "lstm", xs, units=16, layers=2)
        return T.sum_all(outs[-1])

    results["lstm_forward"] = grad_check(lstm_loss, store, eps=eps,
                                         max_coords_per_param=coords_per_param,
                                         seed=seed)

    # conditioning gate
    store = ParamStore(seed=seed + 1, dtype=np.float64)
    v_star = T.Tensor(rng.standard_normal((3, 30)))
    h_t = T.Tensor(rng.standard_normal((3, 12)))

    def gate_loss():
        o_t, _, _ = gated_update(store, "gate", v_star, h_t, units=12)
        return T.sum_all(o_t)

    results["gated_update"] = grad_check(gate_loss, store, eps=eps,
                                         max_coords_per_param=coords_per_param,
                                         seed=seed)

    # character convolution
    store = ParamStore(seed=seed + 2, dtype=np.float64)

    def char_loss():
        return T.sum_all(char_cnn(store, "char", "resolving", emb_width=12))

    results["char_cnn"] = grad_check(char_loss, store, eps=eps,
                                     max_coords_per_param=coords_per_param,
                                     seed=seed)

    # definition encoder
    store = ParamStore(seed=seed + 3, dtype=np.float64)
    vocab = TokenVocab(["large", "round", "metal", "object"])

    def encoder_loss():
        vec = encode_definition(store, ["a", "large", "round", "object"], vocab,
                                units=16)
        return T.sum_all(vec)

    results["encoder"] = grad_check(encoder_loss, store, eps=eps,
                                    max_coords_per_param=coords_per_param,
                                    seed=seed)

    # frozen-noise soft sampling path: weighted sum of a constant target
    store = ParamStore(seed=seed + 4, dtype=np.float64)
    logits_in = T.Tensor(rng.standard_normal((2, 6)))
    weight = store.add("gs/W", (6, 6))
    noise = sample_gumbel(np.random.default_rng(seed + 5), (2, 6))
    target = rng.standard_normal((2, 6))

    def gs_loss():
        logits = T.matmul(logits_in, weight)
        z = gumbel_softmax(logits, GumbelConfig(tau=0.7), None, noise=noise)
        return T.sum_all(T.mul(z, T.Tensor(target)))

    results["gumbel_softmax"] = grad_check(gs_loss, store, eps=eps,
                                           max_coords_per_param=coords_per_param,
                                           seed=seed)

    # full training step graph: joint matching, gating, decoder, penalty
    table, atomset, entries = two_sense_corpus(num_words=4, seed=seed)
    model = build_model(table, atomset, entries, mode="gs", units=300,
                        seed=seed, dtype=np.float64, min_token_freq=1)
    cfg = TrainConfig(rep_penalty=0.5, dropout=0.0, seed=seed)
    batch = entries[:3]

    def define_loss():
        frozen = np.random.default_rng(seed + 6)
        loss, *_ = _batch_loss(model, batch, "learned", 0.8, cfg,
                               train=True, rng=frozen)
        return loss

    results["define_step"] = grad_check(define_loss, model.store, eps=eps,
                                        max_coords_per_param=coords_per_param,
                                        seed=seed)
    return results
