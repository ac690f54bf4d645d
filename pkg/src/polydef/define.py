"""Gated recurrent definition generator.

A shared 2-layer LSTM encodes (target word, </s>) and then decodes a
definition token by token. At every decoder step the conditioning vector
v* = [word emb; atom emb; POS emb; char affix] is mixed into the hidden
state through update/read gates before the output projection. Training is
teacher-forced cross entropy plus an optional repetition penalty; the
definition-to-atom assignment comes from a pre-matched file (heuristic
mode) or is learned jointly through Gumbel-Softmax sampling.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .corpus import POS_TAGS, EmbeddingTable
from .neural import tensor as T
from .neural.gumbel import GumbelConfig, gumbel_softmax, sample_gumbel
from .neural.layers import (
    CHAR_KERNELS,
    CHAR_OUT_WIDTH,
    NUM_CHARS,
    char_cnn,
    gated_update,
    lstm_initial_state,
    lstm_params,
    lstm_step,
)
from .neural.optim import Adam
from .neural.params import ParamStore
from .sparse import AtomSet
from .vocab import BOS_ID, EOS, EOS_ID, PAD_ID, TokenVocab

logger = logging.getLogger(__name__)

POS_WIDTH = 300
CHAR_EMB_WIDTH = 300
MODES = ("heu", "gs", "stgs")
GENERATIONS_FORMAT = "polydef/generations/1"

_NEG_INF = -1e9


@dataclass
class TrainConfig:
    max_epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    lr_decay: float = 0.8
    lr_floor: float = 1e-6
    dropout: float = 0.5
    patience: int = 2
    improvement_threshold: float = 1e-3  # relative valid-loss decrease that counts
    tau_start: float = 1.0
    tau_decay: float = 0.9
    tau_floor: float = 0.3
    rep_penalty: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.dropout < 1):
            raise ValueError("dropout must be in [0, 1)")
        if self.tau_start <= 0 or self.tau_floor <= 0:
            raise ValueError("temperatures must be positive")
        if not (0 < self.lr_decay <= 1 and 0 < self.tau_decay <= 1):
            raise ValueError("decay factors must be in (0, 1]")
        if self.rep_penalty < 0:
            raise ValueError("rep_penalty must be >= 0")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs, patience must be >= 1")


@dataclass
class DefinitionOutput:
    word: str
    atom_id: int  # -1 for single-sense (zero-atom) outputs
    tokens: tuple[str, ...]
    score: float  # length-normalized log-likelihood
    pos: str

    @property
    def surface_tokens(self) -> tuple[str, ...]:
        """Tokens without the terminal end-of-sequence marker."""
        if self.tokens and self.tokens[-1] == EOS:
            return self.tokens[:-1]
        return self.tokens


class DefineModel:
    """Parameter container plus the frozen inputs it conditions on.

    Parameters are created in a fixed order from the seeded store, so two
    models built with the same arguments are identical. Word and atom
    embeddings stay frozen; token/POS/char embeddings and all recurrent,
    gate, projection, and adapter weights are learned.
    """

    def __init__(self, table: EmbeddingTable, atomset: AtomSet, vocab: TokenVocab,
                 mode: str = "gs", units: int = 300, seed: int = 0,
                 dtype=np.float32, zero_atom: bool = False):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.table = table
        self.atomset = atomset
        self.vocab = vocab
        self.mode = mode
        self.units = units
        self.zero_atom = zero_atom
        self.store = ParamStore(seed=seed, dtype=dtype)

        self.cond_width = 2 * units + POS_WIDTH + CHAR_OUT_WIDTH
        store = self.store
        store.add("token_emb", (len(vocab), units))
        lstm_params(store, "define_lstm", units, units, 2)
        store.add("gate/z/W", (self.cond_width + units, units))
        store.add("gate/z/b", (units,), init="zeros")
        store.add("gate/r/W", (self.cond_width + units, self.cond_width))
        store.add("gate/r/b", (self.cond_width,), init="zeros")
        store.add("gate/h/W", (self.cond_width + units, units))
        store.add("gate/h/b", (units,), init="zeros")
        store.add("pos_emb", (len(POS_TAGS), POS_WIDTH))
        store.add("char/emb", (NUM_CHARS, CHAR_EMB_WIDTH))
        for k, filters in CHAR_KERNELS:
            store.add(f"char/k{k}/W", (k * CHAR_EMB_WIDTH, filters))
            store.add(f"char/k{k}/b", (filters,), init="zeros")
        store.add("out_proj/W", (units, len(vocab)))
        store.add("out_proj/b", (len(vocab),), init="zeros")
        if mode in ("gs", "stgs"):
            lstm_params(store, "match_lstm", units, units, 2)
        if table.dim != units:
            store.add("adapter/W", (table.dim, units))

    # -- conditioning pieces -------------------------------------------------

    def adapt(self, vectors: np.ndarray) -> T.Tensor:
        """Project raw embedding-space rows to the recurrent width."""
        x = self.store.constant(vectors)
        if "adapter/W" in self.store:
            return T.matmul(x, self.store["adapter/W"])
        return x

    def pos_rows(self, pos_list) -> T.Tensor:
        ids = np.array([POS_TAGS.index(p) for p in pos_list])
        return T.take_rows(self.store["pos_emb"], ids)

    def char_rows(self, words) -> T.Tensor:
        cache: dict[str, T.Tensor] = {}
        for w in words:
            if w not in cache:
                cache[w] = char_cnn(self.store, "char", w, emb_width=CHAR_EMB_WIDTH)
        return T.concat([cache[w] for w in words], axis=0)

    def token_rows(self, ids) -> T.Tensor:
        return T.take_rows(self.store["token_emb"], np.asarray(ids))

    def encode_words(self, words, train: bool = False, rng=None,
                     dropout_rate: float = 0.5):
        """Shared-LSTM encoding of (target word, </s>); returns the state."""
        word_vecs = np.stack([self.table.vector(w) for w in words])
        x1 = self.adapt(word_vecs)
        x2 = self.token_rows(np.full(len(words), EOS_ID))
        state = lstm_initial_state(self.store, len(words), self.units, 2)
        for x in (x1, x2):
            _, state = lstm_step(self.store, "define_lstm", x, state, self.units,
                                 train=train, dropout_rate=dropout_rate, rng=rng)
        return state

    def atom_rows_fixed(self, atom_vecs: np.ndarray) -> T.Tensor:
        """Adapted atom embeddings for pre-assigned atoms, shape (B, units)."""
        return self.adapt(atom_vecs)

    def zero_atom_rows(self, batch: int) -> T.Tensor:
        return self.store.constant(np.zeros((batch, self.units)))

    def v_star(self, word_rows, atom_rows, pos_rows, char_rows) -> T.Tensor:
        return T.concat([word_rows, atom_rows, pos_rows, char_rows], axis=1)

    def decode_step(self, token_ids, state, v_star, train: bool = False,
                    rng=None, dropout_rate: float = 0.5, mask=None):
        """One decoder step; returns (logits, o_t, z_t, r_t, new state)."""
        x = self.token_rows(token_ids)
        h, state = lstm_step(self.store, "define_lstm", x, state, self.units,
                             train=train, dropout_rate=dropout_rate, rng=rng, mask=mask)
        o_t, z_t, r_t = gated_update(self.store, "gate", v_star, h, self.units)
        logits = T.add(T.matmul(o_t, self.store["out_proj/W"]), self.store["out_proj/b"])
        return logits, o_t, z_t, r_t, state

    # -- learned matching ----------------------------------------------------

    def match_atoms_batch(self, entries):
        """Padded (B, K, D) atom stack, id grid, and pad mask for a batch."""
        per_entry = [sorted(self.atomset.coeffs[e.word]) for e in entries]
        k_max = max(len(p) for p in per_entry)
        dim = self.atomset.dim
        stack = np.zeros((len(entries), k_max, dim))
        ids = np.full((len(entries), k_max), -1)
        pad = np.ones((len(entries), k_max))
        for b, pairs in enumerate(per_entry):
            for i, (j, _) in enumerate(pairs):
                stack[b, i] = self.atomset.atoms[j]
                ids[b, i] = j
                pad[b, i] = 0.0
        return stack, ids, pad

    def encode_definitions(self, entries, train: bool = False, rng=None,
                           dropout_rate: float = 0.5) -> T.Tensor:
        """Batched definition encoder; returns final hidden rows (B, units)."""
        lengths = [len(e.definition) for e in entries]
        t_max = max(lengths)
        ids = np.full((len(entries), t_max), PAD_ID)
        for b, e in enumerate(entries):
            ids[b, : lengths[b]] = self.vocab.ids(e.definition)
        state = lstm_initial_state(self.store, len(entries), self.units, 2)
        for t in range(t_max):
            mask = (np.array(lengths) > t).astype(float)[:, None]
            _, state = lstm_step(self.store, "match_lstm", self.token_rows(ids[:, t]),
                                 state, self.units, train=train,
                                 dropout_rate=dropout_rate, rng=rng, mask=mask)
        return state[-1][0]

    def match_weights(self, entries, tau: float, train: bool, rng,
                      straight_through: bool, dropout_rate: float = 0.5):
        """Joint-matching weights for a batch.

        Training samples fresh Gumbel noise per example visit; evaluation
        uses the noise-free softmax of the logits (one-hot at the argmax in
        straight-through mode). Returns (weights tensor (B, K), atom id
        grid, atom stack, soft weight values for logging).
        """
        stack, ids, pad = self.match_atoms_batch(entries)
        def_vec = self.encode_definitions(entries, train=train, rng=rng,
                                          dropout_rate=dropout_rate)
        proj = def_vec
        if "adapter/W" in self.store:
            proj = T.matmul(def_vec, T.transpose(self.store["adapter/W"]))
        logits = T.row_dots(proj, stack.astype(self.store.dtype))
        logits = T.add(logits, self.store.constant(pad * _NEG_INF))
        if train:
            noise = sample_gumbel(rng, logits.values.shape)
            z = gumbel_softmax(logits, GumbelConfig(tau=tau), rng, noise=noise)
        else:
            z = T.softmax(logits, axis=-1)
        soft_values = np.asarray(z.values)
        if straight_through:
            z = T.straight_through_onehot(z)
        return z, ids, stack, soft_values

    # -- persistence -----------------------------------------------------

    def save(self, path) -> None:
        meta = {
            "mode": self.mode,
            "units": self.units,
            "zero_atom": self.zero_atom,
            "vocab": self.vocab.tokens(),
            "dim": self.table.dim,
        }
        self.store.save(path, meta=meta)

    @classmethod
    def load(cls, path, table: EmbeddingTable, atomset: AtomSet) -> "DefineModel":
        store, meta = ParamStore.load(path)
        vocab = TokenVocab(t for t in meta["vocab"])
        if meta["dim"] != table.dim:
            raise ValueError(
                f"checkpoint expects embeddings of dim {meta['dim']}, got {table.dim}"
            )
        model = cls.__new__(cls)
        model.table = table
        model.atomset = atomset
        model.vocab = vocab
        model.mode = meta["mode"]
        model.units = int(meta["units"])
        model.zero_atom = bool(meta["zero_atom"])
        model.store = store
        model.cond_width = 2 * model.units + POS_WIDTH + CHAR_OUT_WIDTH
        return model


def build_model(table, atomset, train_entries, mode: str = "gs", units: int = 300,
                seed: int = 0, dtype=np.float32, zero_atom: bool = False,
                min_token_freq: int = 2) -> DefineModel:
    vocab = TokenVocab.build(train_entries, min_freq=min_token_freq)
    return DefineModel(table, atomset, vocab, mode=mode, units=units, seed=seed,
                       dtype=dtype, zero_atom=zero_atom)


def _usable(model: DefineModel, entries, require_atoms: bool):
    kept, skipped = [], 0
    for e in entries:
        if e.word not in model.table:
            skipped += 1
            continue
        if require_atoms and not model.atomset.coeffs.get(e.word):
            skipped += 1
            continue
        kept.append(e)
    if skipped:
        logger.warning("skipping %d entries without embeddings or atoms", skipped)
    return kept


def _prefix_matrix(target_ids: np.ndarray, step: int, vocab_size: int) -> np.ndarray:
    """(B, V) indicator of ground-truth tokens already emitted before `step`."""
    mat = np.zeros((target_ids.shape[0], vocab_size))
    if step > 0:
        prefix = target_ids[:, :step]
        rows = np.repeat(np.arange(target_ids.shape[0]), step)
        mat[rows, prefix.reshape(-1)] = 1.0
        mat[:, PAD_ID] = 0.0
    return mat


def _batch_loss(model: DefineModel, entries, atom_rows, tau, cfg: TrainConfig,
                train: bool, rng):
    """Teacher-forced loss graph for one batch.

    Returns (loss tensor, token count, summed CE value, summed penalty
    value, soft match values or None).
    """
    words = [e.word for e in entries]
    batch = len(entries)
    word_rows = model.adapt(np.stack([model.table.vector(w) for w in words]))
    pos_rows = model.pos_rows([e.pos for e in entries])
    char_rows = model.char_rows(words)

    soft_values = None
    if atom_rows == "learned":
        z, ids, stack, soft_values = model.match_weights(
            entries, tau, train, rng, straight_through=(model.mode == "stgs"),
            dropout_rate=cfg.dropout)
        weighted = T.weighted_rows(z, stack.astype(model.store.dtype))
        if "adapter/W" in model.store:
            weighted = T.matmul(weighted, model.store["adapter/W"])
        atom_rows = weighted

    v_star = model.v_star(word_rows, atom_rows, pos_rows, char_rows)
    state = model.encode_words(words, train=train, rng=rng, dropout_rate=cfg.dropout)

    lengths = [len(e.definition) + 1 for e in entries]  # +1 for </s>
    t_max = max(lengths)
    input_ids = np.full((batch, t_max), PAD_ID)
    target_ids = np.full((batch, t_max), PAD_ID)
    for b, e in enumerate(entries):
        ids = model.vocab.ids(e.definition)
        input_ids[b, : len(ids) + 1] = [BOS_ID] + ids
        target_ids[b, : len(ids) + 1] = ids + [EOS_ID]
    step_mask = np.arange(t_max)[None, :] < np.array(lengths)[:, None]

    vocab_size = len(model.vocab)
    ce_total = None
    pen_total = None
    for t in range(t_max):
        mask_col = step_mask[:, t].astype(float)[:, None]
        logits, _, _, _, state = model.decode_step(
            input_ids[:, t], state, v_star, train=train, rng=rng,
            dropout_rate=cfg.dropout, mask=mask_col)
        ce = T.cross_entropy(logits, target_ids[:, t])
        ce = T.sum_all(T.mul(ce, model.store.constant(mask_col[:, 0])))
        ce_total = ce if ce_total is None else T.add(ce_total, ce)
        if cfg.rep_penalty > 0:
            probs = T.softmax(logits, axis=-1)
            hit = T.sum_axis(
                T.mul(probs, model.store.constant(_prefix_matrix(target_ids, t, vocab_size))),
                axis=1)
            pen = T.sum_all(T.mul(hit, model.store.constant(mask_col[:, 0])))
            pen_total = pen if pen_total is None else T.add(pen_total, pen)

    tokens = int(step_mask.sum())
    loss = T.scale(ce_total, 1.0 / tokens)
    pen_value = 0.0
    if pen_total is not None:
        loss = T.add(loss, T.scale(pen_total, cfg.rep_penalty / tokens))
        pen_value = float(pen_total.values)
    return loss, tokens, float(ce_total.values), pen_value, soft_values


def _fixed_atom_rows(model: DefineModel, entries, atom_ids):
    vecs = np.stack([model.atomset.atoms[j] for j in atom_ids])
    return model.atom_rows_fixed(vecs)


def _epoch_batches(indices, batch_size):
    for lo in range(0, len(indices), batch_size):
        yield indices[lo : lo + batch_size]


def evaluate_loss(model: DefineModel, entries, cfg: TrainConfig, tau: float,
                  heu_atoms=None) -> float | None:
    """Deterministic teacher-forced loss (no dropout, noise-free matching)."""
    if not entries:
        return None
    total_loss = 0.0
    total_tokens = 0
    for batch_idx in _epoch_batches(list(range(len(entries))), cfg.batch_size):
        batch = [entries[i] for i in batch_idx]
        if model.zero_atom:
            atom_rows = model.zero_atom_rows(len(batch))
        elif model.mode == "heu":
            atom_rows = _fixed_atom_rows(model, batch, [heu_atoms[i] for i in batch_idx])
        else:
            atom_rows = "learned"
        loss, tokens, ce, pen, _ = _batch_loss(model, batch, atom_rows, tau, cfg,
                                               train=False, rng=None)
        total_loss += ce + cfg.rep_penalty * pen
        total_tokens += tokens
    return total_loss / total_tokens


def train(model: DefineModel, split, cfg: TrainConfig, heu_atoms=None,
          heu_valid_atoms=None) -> list[dict]:
    """Optimize the model; returns one log record per epoch.

    `heu_atoms` (and `heu_valid_atoms` when a validation part exists) give
    the pre-matched atom id per entry for heuristic mode; learned modes
    match jointly inside the graph. Entries whose word lacks an embedding
    or atoms are skipped with a warning.
    """
    require_atoms = not model.zero_atom
    if model.mode == "heu" and require_atoms:
        if heu_atoms is None or len(heu_atoms) != len(split.train):
            raise ValueError("heuristic mode needs one pre-matched atom id per train entry")
        pairs = [(e, a) for e, a in zip(split.train, heu_atoms)
                 if e.word in model.table and model.atomset.coeffs.get(e.word)]
        skipped = len(split.train) - len(pairs)
        if skipped:
            logger.warning("skipping %d entries without embeddings or atoms", skipped)
        train_entries = [e for e, _ in pairs]
        train_atom_ids = [a for _, a in pairs]
    else:
        train_entries = _usable(model, split.train, require_atoms)
        train_atom_ids = None
    if not train_entries:
        raise ValueError("no usable training entries")

    valid_entries = None
    valid_atom_ids = None
    if split.valid:
        if model.mode == "heu" and require_atoms:
            if heu_valid_atoms is None or len(heu_valid_atoms) != len(split.valid):
                raise ValueError("heuristic mode needs pre-matched atom ids for validation")
            pairs = [(e, a) for e, a in zip(split.valid, heu_valid_atoms)
                     if e.word in model.table and model.atomset.coeffs.get(e.word)]
            valid_entries = [e for e, _ in pairs]
            valid_atom_ids = [a for _, a in pairs]
        else:
            valid_entries = _usable(model, split.valid, require_atoms)

    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(model.store, lr=cfg.lr, betas=cfg.betas)
    lr = cfg.lr
    tau = cfg.tau_start
    best_valid = float("inf")
    bad_epochs = 0
    logs: list[dict] = []

    for epoch in range(cfg.max_epochs):
        order = list(rng.permutation(len(train_entries)))
        epoch_loss = 0.0
        epoch_tokens = 0
        weight_sum = 0.0
        weight_count = 0
        for batch_idx in _epoch_batches(order, cfg.batch_size):
            batch = [train_entries[i] for i in batch_idx]
            if model.zero_atom:
                atom_rows = model.zero_atom_rows(len(batch))
            elif model.mode == "heu":
                atom_rows = _fixed_atom_rows(model, batch,
                                             [train_atom_ids[i] for i in batch_idx])
            else:
                atom_rows = "learned"
            model.store.zero_grads()
            loss, tokens, ce, pen, soft = _batch_loss(model, batch, atom_rows, tau,
                                                      cfg, train=True, rng=rng)
            T.backward(loss)
            optimizer.lr = lr
            optimizer.step()
            epoch_loss += ce + cfg.rep_penalty * pen
            epoch_tokens += tokens
            if soft is not None:
                weight_sum += float(soft.max(axis=-1).sum())
                weight_count += soft.shape[0]

        valid_loss = None
        if valid_entries:
            valid_loss = evaluate_loss(model, valid_entries, cfg, tau,
                                       heu_atoms=valid_atom_ids)
        record = {
            "epoch": epoch,
            "train_loss": epoch_loss / epoch_tokens,
            "valid_loss": valid_loss,
            "lr": lr,
            "tau": tau,
            "mean_max_match_weight": (weight_sum / weight_count) if weight_count else None,
        }
        logs.append(record)

        if valid_loss is not None:
            improvement = (best_valid - valid_loss) / best_valid if best_valid < float("inf") else float("inf")
            if improvement < cfg.improvement_threshold:
                bad_epochs += 1
            else:
                bad_epochs = 0
            best_valid = min(best_valid, valid_loss)
            if bad_epochs >= cfg.patience:
                break

        lr *= cfg.lr_decay
        if lr < cfg.lr_floor:
            break
        tau = max(tau * cfg.tau_decay, cfg.tau_floor)
    return logs


def _atom_rows_for(model: DefineModel, word: str, atom) -> T.Tensor:
    """Conditioning atom row for one (word, atom) pair.

    `atom` may be an atom id, a weight vector over the word's atoms in
    ascending-id order, or None for the zero (single-sense) slice.
    """
    if atom is None or model.zero_atom:
        return model.zero_atom_rows(1)
    if isinstance(atom, (int, np.integer)):
        ids = [j for j, _ in sorted(model.atomset.coeffs[word])]
        if atom not in ids:
            raise ValueError(f"atom {atom} does not belong to word {word!r}")
        vec = model.atomset.atoms[int(atom)][None, :]
        return model.atom_rows_fixed(vec)
    weights = np.asarray(atom, dtype=float)
    pairs = sorted(model.atomset.coeffs[word])
    if weights.shape != (len(pairs),):
        raise ValueError(f"expected {len(pairs)} weights for word {word!r}")
    vec = weights @ np.stack([model.atomset.atoms[j] for j, _ in pairs])
    return model.atom_rows_fixed(vec[None, :])


def log_likelihood(model: DefineModel, word: str, atom, pos: str, tokens):
    """Teacher-forced total and per-token log-probability of `tokens`.

    Scores exactly the given tokens (append the </s> marker to include the
    stopping probability, as generation scores do).
    """
    tokens = list(tokens)
    if not tokens:
        raise ValueError("empty token sequence")
    if word not in model.table:
        raise KeyError(f"word {word!r} not in embedding table")
    v_star = model.v_star(
        model.adapt(model.table.vector(word)[None, :]),
        _atom_rows_for(model, word, atom),
        model.pos_rows([pos]),
        model.char_rows([word]),
    )
    state = model.encode_words([word])
    ids = model.vocab.ids(tokens)
    per_token = []
    prev = BOS_ID
    for tid in ids:
        logits, _, _, _, state = model.decode_step(np.array([prev]), state, v_star)
        row = logits.values[0]
        shifted = row - row.max()
        logp = float(shifted[tid] - np.log(np.exp(shifted).sum()))
        per_token.append(logp)
        prev = tid
    return float(sum(per_token)), per_token


def generate(model: DefineModel, word: str, atom, pos: str, max_len: int = 30,
             collect_gates: bool = False) -> DefinitionOutput:
    """Greedy decoding for one (word, atom) pair.

    Stops at the end marker (kept as the final token) or at `max_len`.
    The score is the length-normalized log-likelihood of the emitted
    tokens. Deterministic: same inputs, same output.
    """
    if word not in model.table:
        raise KeyError(f"word {word!r} not in embedding table")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    v_star = model.v_star(
        model.adapt(model.table.vector(word)[None, :]),
        _atom_rows_for(model, word, atom),
        model.pos_rows([pos]),
        model.char_rows([word]),
    )
    state = model.encode_words([word])
    out_tokens: list[str] = []
    gates: list[dict] = []
    total = 0.0
    prev = BOS_ID
    for _ in range(max_len):
        logits, _, z_t, r_t, state = model.decode_step(np.array([prev]), state, v_star)
        row = logits.values[0]
        masked = row.copy()
        masked[PAD_ID] = _NEG_INF  # masking picks the token; scoring uses the
        masked[BOS_ID] = _NEG_INF  # full distribution, matching log_likelihood
        tid = int(np.argmax(masked))
        shifted = row - row.max()
        total += float(shifted[tid] - np.log(np.exp(shifted).sum()))
        out_tokens.append(model.vocab.token(tid))
        if collect_gates:
            gates.append({"z": z_t.values[0].copy(), "r": r_t.values[0].copy()})
        prev = tid
        if tid == EOS_ID:
            break
    atom_id = int(atom) if isinstance(atom, (int, np.integer)) and not model.zero_atom else -1
    output = DefinitionOutput(word=word, atom_id=atom_id, tokens=tuple(out_tokens),
                              score=total / len(out_tokens), pos=pos)
    if collect_gates:
        output.gate_trace = gates
    return output


def generate_beam(model: DefineModel, word: str, atom, pos: str, max_len: int = 30,
                  beam_width: int = 3, n_best: int = 3) -> list[DefinitionOutput]:
    """Beam-search decoding; returns up to `n_best` outputs by descending
    length-normalized score (ties broken by token sequence)."""
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    v_star = model.v_star(
        model.adapt(model.table.vector(word)[None, :]),
        _atom_rows_for(model, word, atom),
        model.pos_rows([pos]),
        model.char_rows([word]),
    )
    init_state = model.encode_words([word])
    beams = [{"ids": (), "state": init_state, "total": 0.0}]
    finished: list[tuple[float, tuple[int, ...]]] = []
    for _ in range(max_len):
        candidates = []
        for beam in beams:
            prev = beam["ids"][-1] if beam["ids"] else BOS_ID
            logits, _, _, _, state = model.decode_step(np.array([prev]), beam["state"],
                                                       v_star)
            row = logits.values[0]
            shifted = row - row.max()
            logps = shifted - np.log(np.exp(shifted).sum())
            ranked = logps.copy()
            ranked[PAD_ID] = _NEG_INF  # never expand pad/start; scores stay on
            ranked[BOS_ID] = _NEG_INF  # the full distribution
            top = np.argsort(-ranked, kind="stable")[:beam_width]
            for tid in top:
                candidates.append({
                    "ids": beam["ids"] + (int(tid),),
                    "state": state,
                    "total": beam["total"] + float(logps[tid]),
                })
        candidates.sort(key=lambda c: (-c["total"], c["ids"]))
        beams = []
        for cand in candidates[: beam_width * 2]:
            if cand["ids"][-1] == EOS_ID:
                finished.append((cand["total"] / len(cand["ids"]), cand["ids"]))
            elif len(beams) < beam_width:
                beams.append(cand)
        if not beams:
            break
    for beam in beams:
        finished.append((beam["total"] / len(beam["ids"]), beam["ids"]))
    finished.sort(key=lambda f: (-f[0], tuple(f[1])))
    atom_id = int(atom) if isinstance(atom, (int, np.integer)) and not model.zero_atom else -1
    results = []
    for score, ids in finished[:n_best]:
        tokens = tuple(model.vocab.token(i) for i in ids)
        results.append(DefinitionOutput(word=word, atom_id=atom_id, tokens=tokens,
                                        score=score, pos=pos))
    return results


def repetition_penalty(distributions, token_ids) -> float:
    """Mean per-step probability mass on tokens already emitted.

    `distributions` holds one probability vector per step (array-like or a
    (T, V) tensor); `token_ids` the aligned emitted/teacher-forced ids, so
    the prefix for step t is token_ids[:t]. Tensor input yields a tensor
    (differentiable); arrays yield a float.
    """
    token_ids = [int(i) for i in token_ids]
    if isinstance(distributions, T.Tensor):
        steps, vocab_size = distributions.values.shape
        mat = np.zeros((steps, vocab_size))
        for t in range(steps):
            seen = {i for i in token_ids[:t] if i != PAD_ID}
            mat[t, list(seen)] = 1.0
        hit = T.sum_all(T.mul(distributions, T.Tensor(mat.astype(distributions.values.dtype))))
        return T.scale(hit, 1.0 / steps)
    total = 0.0
    rows = [np.asarray(d) for d in distributions]
    for t, row in enumerate(rows):
        seen = {i for i in token_ids[:t] if i != PAD_ID}
        total += float(sum(row[i] for i in seen))
    return total / len(rows) if rows else 0.0


def write_generations(outputs, path) -> None:
    """Line-delimited generation records with a version header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": GENERATIONS_FORMAT}, sort_keys=True) + "\n")
        for o in outputs:
            fh.write(json.dumps({
                "word": o.word,
                "atom_id": o.atom_id,
                "pos": o.pos,
                "score": o.score,
                "tokens": list(o.tokens),
            }, sort_keys=True) + "\n")


def read_generations(path) -> list[DefinitionOutput]:
    outputs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("format"):
                continue
            outputs.append(DefinitionOutput(
                word=record["word"], atom_id=int(record["atom_id"]),
                tokens=tuple(record["tokens"]), score=float(record["score"]),
                pos=record["pos"]))
    return outputs
