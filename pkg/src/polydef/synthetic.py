"""Synthetic problem generators with known ground truth.

These build inputs whose correct answers are known by construction, so
they double as oracles: a sparse-coding problem with planted supports, an
embedding set realizing an exact atom/word cosine matrix, and a tiny
two-senses-per-word corpus with orthogonal sense atoms.
"""

from __future__ import annotations

import numpy as np

from .corpus import DictEntry, EmbeddingTable
from .sparse import AtomSet


def sparse_problem(n_words: int = 500, dim: int = 50, num_atoms: int = 50,
                   sparsity: int = 5, noise: float = 0.01, seed: int = 0):
    """Planted sparse-combination problem with incoherent atoms.

    Words are exact `sparsity`-sparse combinations of incoherent unit atoms
    (a random orthonormal set while num_atoms <= dim; extra atoms, if any,
    are random unit rows) with coefficient magnitudes in [0.5, 1.5], random
    sign, plus isotropic Gaussian noise. Incoherence keeps planted-support
    recovery well posed for greedy pursuit, so the generator doubles as the
    recovery oracle. Returns (table, true_atoms, supports, coefficients).
    """
    rng = np.random.default_rng(seed)
    basis = np.linalg.qr(rng.standard_normal((dim, dim)))[0].T
    if num_atoms <= dim:
        atoms = basis[:num_atoms].copy()
    else:
        extra = rng.standard_normal((num_atoms - dim, dim))
        extra /= np.linalg.norm(extra, axis=1, keepdims=True)
        atoms = np.vstack([basis, extra])
    supports = []
    coefs = []
    vectors = np.empty((n_words, dim))
    for i in range(n_words):
        support = np.sort(rng.choice(num_atoms, size=sparsity, replace=False))
        magnitude = rng.uniform(0.5, 1.5, size=sparsity)
        sign = rng.choice([-1.0, 1.0], size=sparsity)
        c = magnitude * sign
        vectors[i] = c @ atoms[support] + noise * rng.standard_normal(dim)
        supports.append(set(int(j) for j in support))
        coefs.append({int(j): float(v) for j, v in zip(support, c)})
    words = [f"w{i:04d}" for i in range(n_words)]
    return EmbeddingTable(dim, words, vectors), atoms, supports, coefs


def embed_similarity_matrix(sims, atom_ids, words):
    """Atoms and word vectors realizing an exact cosine-similarity matrix.

    `sims` is (num_atoms, num_words) with columns of squared norm <= 1.
    Atoms are the first standard basis vectors; each word adds its own
    orthogonal component to reach unit norm, so cos(atom_i, word_j) equals
    sims[i, j] exactly. Returns (atom pairs, table).
    """
    sims = np.asarray(sims, dtype=np.float64)
    k, n = sims.shape
    if len(atom_ids) != k or len(words) != n:
        raise ValueError("matrix shape must match atom_ids x words")
    col_sq = (sims**2).sum(axis=0)
    if (col_sq > 1.0 + 1e-12).any():
        raise ValueError("each column must have squared norm <= 1")
    dim = k + n
    atoms = [(aid, np.eye(dim)[i]) for i, aid in enumerate(atom_ids)]
    vectors = np.zeros((n, dim))
    for j in range(n):
        vectors[j, :k] = sims[:, j]
        vectors[j, k + j] = np.sqrt(max(0.0, 1.0 - col_sq[j]))
    return atoms, EmbeddingTable(dim, list(words), vectors)


# ten shared senses, each with a fixed definition and POS
_SENSES = (
    ("noun", ("a", "small", "tool", "used", "for", "cutting", "wood")),
    ("noun", ("a", "heavy", "box", "used", "for", "storing", "grain")),
    ("noun", ("a", "bright", "lamp", "hung", "above", "the", "door")),
    ("noun", ("a", "narrow", "road", "leading", "to", "the", "harbor")),
    ("noun", ("a", "round", "coin", "made", "of", "silver")),
    ("verb", ("to", "move", "something", "gently", "across", "the", "floor")),
    ("verb", ("to", "press", "leaves", "flat", "under", "a", "stone")),
    ("verb", ("to", "throw", "a", "rope", "over", "the", "wall")),
    ("verb", ("to", "fold", "cloth", "into", "a", "neat", "bundle")),
    ("verb", ("to", "pour", "water", "slowly", "from", "a", "jug")),
)


def two_sense_corpus(num_words: int = 20, seed: int = 0):
    """Tiny corpus where every word mixes two shared orthogonal sense atoms.

    The ten atoms are standard basis vectors, each carrying a fixed sense
    (definition and POS). Word i combines senses (i, i+1 mod 10) for
    i < 10 and (i-10, i-8 mod 10) after that, so every sense is shared by
    several words — assignments learned on one word transfer to others, as
    with real sense inventories. Returns (table, atomset, entries) with two
    entries per word (sense_group 1 and 2).
    """
    num_senses = len(_SENSES)
    if not 2 <= num_words <= 2 * num_senses:
        raise ValueError(f"num_words must be in [2, {2 * num_senses}]")
    rng = np.random.default_rng(seed)
    pairs = [(i, (i + 1) % num_senses) for i in range(num_senses)]
    pairs += [(i, (i + 2) % num_senses) for i in range(num_senses)]
    pairs = pairs[:num_words]
    dim = num_senses
    atoms = np.eye(dim)
    words = [f"word{i:02d}" for i in range(num_words)]
    order = rng.permutation(num_words)  # decouple word names from sense pairs
    vectors = np.zeros((num_words, dim))
    coeffs = {}
    entries = []
    inv = 1.0 / np.sqrt(2.0)
    for i, word in enumerate(words):
        s, t = pairs[int(order[i])]
        vectors[i, s] += inv
        vectors[i, t] += inv
        coeffs[word] = [(min(s, t), inv), (max(s, t), inv)]
        for group, sense in enumerate((s, t), start=1):
            pos, definition = _SENSES[sense]
            entries.append(DictEntry(word=word, pos=pos, definition=definition,
                                     source="synthetic", sense_group=group))
    table = EmbeddingTable(dim, words, vectors)
    atomset = AtomSet(atoms=atoms, coeffs=coeffs,
                      residual_norms={w: 0.0 for w in words}, sparsity=2)
    return table, atomset, entries
