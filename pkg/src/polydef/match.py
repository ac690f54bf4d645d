"""Assign dictionary definitions to sense atoms of the target word.

Two routes: a static heuristic that scores each atom by the sum of its two
best cosine similarities to the definition's content words, and a learned
route that encodes the definition with an LSTM, takes dot-product logits
against the word's atoms, and samples relaxed weights via Gumbel-Softmax
(soft, or straight-through one-hot).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .corpus import DictEntry, EmbeddingTable
from .neural import tensor as T
from .neural.gumbel import GumbelConfig, gumbel_softmax
from .neural.layers import lstm_forward
from .neural.params import ParamStore
from .vocab import TokenVocab

MATCHES_FORMAT = "polydef/matches/1"


def load_stopwords(path=None) -> frozenset[str]:
    """Function-word list; the packaged default unless a path is given."""
    if path is None:
        text = resources.files("polydef").joinpath("data/stopwords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    words = frozenset(line.strip() for line in text.splitlines() if line.strip())
    if not words:
        raise ValueError("empty stopword list")
    return words


@dataclass
class MatchResult:
    atom_ids: tuple[int, ...]
    weights: np.ndarray  # aligned with atom_ids; sums to 1
    chosen_atom: int
    mode: str  # heuristic | gs | stgs
    scores: dict[int, float] | None = None  # heuristic per-atom scores
    weights_tensor: object = field(default=None, repr=False)  # graph node, learned modes


def _cosine(a, b) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def match_heuristic(entry: DictEntry, atoms, table: EmbeddingTable,
                    stopwords) -> MatchResult:
    """Pick the atom whose two best content-word similarities sum highest.

    Stopwords are pruned from the definition first (falling back to the
    unpruned tokens if nothing survives); distinct remaining tokens missing
    from the embedding table are skipped. Each atom scores the sum of its
    two largest cosine similarities to the kept tokens (a single token
    contributes alone). Ties go to the lowest atom id.
    """
    atoms = list(atoms)
    if not atoms:
        raise ValueError(f"word {entry.word!r} has no atoms")
    content = [t for t in entry.definition if t not in stopwords]
    if not content:
        content = list(entry.definition)
    kept = sorted({t for t in content if t in table})
    if not kept:
        raise ValueError(
            f"no definition token of {entry.word!r} is in the embedding table"
        )
    vectors = [table.vector(t) for t in kept]
    scores: dict[int, float] = {}
    for atom_id, atom_vec in atoms:
        sims = sorted((_cosine(atom_vec, v) for v in vectors), reverse=True)
        scores[atom_id] = sims[0] + sims[1] if len(sims) > 1 else sims[0]
    ordered_ids = [a for a, _ in atoms]
    chosen = min(ordered_ids, key=lambda a: (-scores[a], a))
    weights = np.zeros(len(atoms))
    weights[ordered_ids.index(chosen)] = 1.0
    return MatchResult(atom_ids=tuple(ordered_ids), weights=weights,
                       chosen_atom=chosen, mode="heuristic", scores=scores)


def encode_definition(store: ParamStore, tokens, vocab: TokenVocab,
                      units: int = 300, layers: int = 2, train: bool = False,
                      rng=None, dropout_rate: float = 0.5) -> T.Tensor:
    """Final top-layer hidden state of the definition encoder, shape (1, units)."""
    tokens = list(tokens)
    if not tokens:
        raise ValueError("empty token sequence")
    emb = store.add("token_emb", (len(vocab), units))
    xs = [T.take_rows(emb, np.array([vocab.id(t)])) for t in tokens]
    _, state = lstm_forward(store, "match_lstm", xs, units=units, layers=layers,
                            train=train, rng=rng, dropout_rate=dropout_rate)
    return state[-1][0]


def match_logits(store: ParamStore, def_vector: T.Tensor, atom_vectors,
                 units: int) -> T.Tensor:
    """Dot-product logits of a definition vector against each atom.

    Atom vectors whose width differs from the encoder width pass through a
    learned shared linear adapter; same-width atoms are used as-is.
    """
    atom_vectors = np.asarray(atom_vectors, dtype=store.dtype)
    if atom_vectors.ndim != 2 or atom_vectors.shape[0] == 0:
        raise ValueError("need a nonempty (k, D) atom matrix")
    dim = atom_vectors.shape[1]
    projected = T.Tensor(atom_vectors)
    if dim != units:
        adapter = store.add("adapter/W", (dim, units))
        projected = T.matmul(projected, adapter)
    return T.matmul(def_vector, T.transpose(projected))


def match_sampled(logits, cfg: GumbelConfig, rng, atom_ids=None) -> MatchResult:
    """Sample relaxed match weights from logits via Gumbel-Softmax.

    Soft mode returns the full weight vector; straight-through returns a
    one-hot forward value whose gradient contract follows the soft sample.
    """
    tensor_in = logits if isinstance(logits, T.Tensor) else T.Tensor(
        np.asarray(logits, dtype=np.float64))
    z = gumbel_softmax(tensor_in, cfg, rng)
    weights = np.asarray(z.values).reshape(-1)
    if atom_ids is None:
        atom_ids = tuple(range(weights.size))
    chosen_pos = int(np.argmax(weights))
    return MatchResult(atom_ids=tuple(atom_ids), weights=weights,
                       chosen_atom=int(atom_ids[chosen_pos]),
                       mode="stgs" if cfg.straight_through else "gs",
                       weights_tensor=z)


def atoms_for_matching(atomset, word: str):
    """(atom_id, vector) pairs in ascending id order, as matching expects."""
    if word not in atomset.coeffs:
        raise KeyError(f"word {word!r} not in atom set")
    return [(j, atomset.atoms[j]) for j, _ in sorted(atomset.coeffs[word])]
