"""Sparse decomposition of word embeddings into shared sense atoms.

Each embedding is approximated as a sparse linear combination of unit-norm
atom vectors. Coding uses orthogonal matching pursuit; the dictionary is
refined by per-atom least-squares refits (approximate K-SVD style), which
keeps the total squared reconstruction error non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import EmbeddingTable, nearest_words
from .parallel import map_ordered

ATOMS_FORMAT = "polydef/atoms/1"

# correlations below this are treated as zero during pursuit
_CORR_TOL = 1e-10
_RESIDUAL_TOL = 1e-10

# per-atom refit cycles per outer iteration; each cycle only lowers the
# objective, and extra cycles help escape mixed-atom configurations
_UPDATE_PASSES = 3

# recycling moves per outer iteration (see _recycle_atom)
_RECYCLE_MOVES = 2


@dataclass
class DecompConfig:
    num_atoms: int
    sparsity: int = 5
    iterations: int = 30
    tol: float = 1e-4
    seed: int = 0
    restarts: int = 1  # seeded re-inits; the fit with the lowest objective wins

    def __post_init__(self):
        if self.num_atoms < 1:
            raise ValueError("num_atoms must be >= 1")
        if not 1 <= self.sparsity <= self.num_atoms:
            raise ValueError("need 1 <= sparsity <= num_atoms")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class AtomSet:
    """Learned atoms plus per-word sparse coefficients and residual norms."""

    atoms: np.ndarray  # (m, D), unit-norm rows
    coeffs: dict[str, list[tuple[int, float]]]
    residual_norms: dict[str, float] = field(default_factory=dict)
    sparsity: int = 5

    @property
    def num_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def atoms_of(self, word: str) -> list[tuple[int, np.ndarray]]:
        """(atom_id, atom vector) pairs for a word, strongest first."""
        return [(j, self.atoms[j]) for j, _ in word_atoms(self, word)]


def sparse_code(v, atoms, sparsity: int) -> list[tuple[int, float]]:
    """Orthogonal matching pursuit: code `v` on ≤ `sparsity` atom rows.

    Greedily selects the atom with the largest |correlation| to the current
    residual (ties to the lowest id), refits all selected coefficients by
    least squares, and stops when `sparsity` atoms are chosen, the residual
    is (near) zero, or no atom correlates with the residual.
    """
    if sparsity < 1:
        raise ValueError("sparsity must be >= 1")
    v = np.asarray(v, dtype=np.float64)
    atoms = np.asarray(atoms, dtype=np.float64)
    residual = v.copy()
    support: list[int] = []
    coefs = np.zeros(0)
    for _ in range(min(sparsity, atoms.shape[0])):
        corr = atoms @ residual
        j = int(np.argmax(np.abs(corr)))
        if abs(corr[j]) < _CORR_TOL or j in support:
            break
        support.append(j)
        coefs, *_ = np.linalg.lstsq(atoms[support].T, v, rcond=None)
        residual = v - atoms[support].T @ coefs
        if np.linalg.norm(residual) < _RESIDUAL_TOL:
            break
    return [(j, float(c)) for j, c in zip(support, coefs)]


def _refit(v, atoms, support):
    """Least-squares coefficients of v on a fixed support; returns (coefs, residual)."""
    if not support:
        return np.zeros(0), v.copy()
    coefs, *_ = np.linalg.lstsq(atoms[list(support)].T, v, rcond=None)
    return coefs, v - atoms[list(support)].T @ coefs


def _code_word(v, atoms, sparsity, prev_support):
    """OMP with a monotone guard: never worse than refitting the previous support."""
    picked = sparse_code(v, atoms, sparsity)
    new_support = [j for j, _ in picked]
    new_coefs = np.array([c for _, c in picked])
    new_res = v - atoms[new_support].T @ new_coefs if new_support else v.copy()
    if prev_support:
        old_coefs, old_res = _refit(v, atoms, prev_support)
        if np.linalg.norm(old_res) < np.linalg.norm(new_res):
            return list(prev_support), old_coefs
    return new_support, new_coefs


def _recycle_atom(X, norms, atoms, supports, coef_rows, residual, users, taken):
    """Re-seed one atom from the worst-reconstructed word, provably safely.

    Picks the atom with the smallest exact removal loss (the error increase
    from refitting its users without it) among atoms outside the worst
    word's support, and performs the move only when that loss is under the
    worst word's current error. The next pursuit step then codes the worst
    word on the re-seeded atom to (near) zero error, so the total objective
    still cannot increase. Each word anchors at most one move per iteration
    (`taken`). Returns the recycled atom id, or None if no safe move exists.
    """
    errors = np.einsum("ij,ij->i", residual, residual)
    order = np.argsort(-errors, kind="stable")
    w_star = next((int(i) for i in order if int(i) not in taken), None)
    if w_star is None:
        return None
    err_star = errors[w_star]
    if err_star < 1e-20 or norms[w_star] == 0:
        return None
    blocked = set(supports[w_star])
    best = None
    for j in range(len(atoms)):
        if j in blocked:
            continue
        loss = 0.0
        rewrites = []
        for i in users[j]:
            reduced = [k for k in supports[i] if k != j]
            coefs, res = _refit(X[i], atoms, reduced)
            loss += float(res @ res) - errors[i]
            rewrites.append((i, reduced, coefs, res))
            if best is not None and loss >= best[0]:
                break
        if best is None or loss < best[0]:
            best = (loss, j, rewrites)
    if best is None or best[0] >= 0.9 * err_star:
        return None
    _, j, rewrites = best
    for i, reduced, coefs, res in rewrites:
        supports[i] = reduced
        coef_rows[i] = coefs
        residual[i] = res
    atoms[j] = X[w_star] / norms[w_star]
    users[j] = []
    taken.add(w_star)
    return j


def fit_atoms(table: EmbeddingTable, config: DecompConfig, jobs: int = 1) -> AtomSet:
    """Alternate sparse coding and per-atom dictionary refits.

    Atoms initialize from seeded word vectors chosen by farthest-point
    selection (lowest max |cosine| to the picks so far), which spreads the
    starting dictionary and avoids mixed-atom local minima. After each
    refit pass, atoms unused by every word are re-seeded from the currently
    worst-reconstructed word. The total squared error, measured right after
    each coding step, is non-increasing across outer iterations; stops early
    when its relative change drops below ``config.tol``.
    """
    if len(table) == 0:
        raise ValueError("empty embedding table")
    m = config.num_atoms
    if m > len(table) * config.sparsity:
        raise ValueError(f"num_atoms {m} exceeds |vocab|*sparsity = {len(table) * config.sparsity}")

    X = np.asarray(table.vectors, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    best = None
    for restart in range(config.restarts):
        rng = np.random.default_rng([config.seed, restart])
        run = _fit_once(X, norms, m, config, rng, jobs)
        if best is None or run[3][-1] < best[3][-1]:
            best = run
    atoms, supports, coef_rows, objective_history = best

    coeffs: dict[str, list[tuple[int, float]]] = {}
    residual_norms: dict[str, float] = {}
    for i, word in enumerate(table.words):
        pairs = sorted(zip(supports[i], coef_rows[i]), key=lambda p: p[0])
        coeffs[word] = [(int(j), float(c)) for j, c in pairs]
        rec = X[i].copy()
        if supports[i]:
            rec -= atoms[supports[i]].T @ coef_rows[i]
        residual_norms[word] = float(np.linalg.norm(rec))

    result = AtomSet(atoms=atoms, coeffs=coeffs, residual_norms=residual_norms,
                     sparsity=config.sparsity)
    result.objective_history = objective_history
    return result


def _fit_once(X, norms, m, config: DecompConfig, rng, jobs: int):
    """One seeded alternating-optimization run.

    Returns (atoms, supports, coefficient rows, objective history).
    """
    n, dim = X.shape
    atoms = np.empty((m, dim))
    candidates = np.flatnonzero(norms > 0)
    take = min(m, len(candidates))
    if take:
        # spread-out seeding: each atom is a word vector drawn from the
        # least-coherent pool w.r.t. the picks so far (randomized within the
        # pool so restarts explore different starting dictionaries)
        units = X[candidates] / norms[candidates, None]
        pool_size = max(1, len(candidates) // 20)
        first = int(rng.integers(len(candidates)))
        atoms[0] = units[first]
        max_coherence = np.abs(units @ units[first])
        for row in range(1, take):
            pool = np.argsort(max_coherence, kind="stable")[:pool_size]
            pick = int(pool[rng.integers(len(pool))])
            atoms[row] = units[pick]
            max_coherence = np.maximum(max_coherence, np.abs(units @ units[pick]))
    for row in range(take, m):  # more atoms than usable words: random unit rows
        vec = rng.standard_normal(dim)
        atoms[row] = vec / np.linalg.norm(vec)

    supports: list[list[int]] = [[] for _ in range(n)]
    coef_rows: list[np.ndarray] = [np.zeros(0) for _ in range(n)]
    objective_history: list[float] = []

    for _ in range(config.iterations):
        coded = map_ordered(
            lambda i: _code_word(X[i], atoms, config.sparsity, supports[i]), range(n), jobs
        )
        residual = X.copy()
        for i, (support, coefs) in enumerate(coded):
            supports[i], coef_rows[i] = support, coefs
            if support:
                residual[i] -= atoms[support].T @ coefs

        objective = float(np.sum(residual**2))
        objective_history.append(objective)
        if len(objective_history) > 1:
            prev = objective_history[-2]
            if prev - objective < config.tol * max(prev, 1e-30):
                break
        if objective == 0.0:
            break

        users: list[list[int]] = [[] for _ in range(m)]
        for i, support in enumerate(supports):
            for j in support:
                users[j].append(i)

        for _ in range(_UPDATE_PASSES):
            for j in range(m):
                rows = users[j]
                if not rows:
                    continue
                g = np.array([coef_rows[i][supports[i].index(j)] for i in rows])
                R = residual[rows] + np.outer(g, atoms[j])
                d = R.T @ g
                dnorm = np.linalg.norm(d)
                if dnorm < 1e-30:
                    continue
                d /= dnorm
                g_new = R @ d
                atoms[j] = d
                for pos, i in enumerate(rows):
                    coef_rows[i][supports[i].index(j)] = g_new[pos]
                residual[rows] = R - np.outer(g_new, d)

        taken: set[int] = set()
        recycled: set[int] = set()
        for _ in range(_RECYCLE_MOVES):
            moved = _recycle_atom(X, norms, atoms, supports, coef_rows, residual,
                                  users, taken)
            if moved is None:
                break
            recycled.add(moved)

        res_norms = np.linalg.norm(residual, axis=1)
        dead = [j for j in range(m) if not users[j] and j not in recycled]
        if dead:
            worst = [int(i) for i in np.argsort(-res_norms, kind="stable")
                     if int(i) not in taken]
            for pos, j in enumerate(dead):
                i = worst[pos % len(worst)] if worst else None
                if i is not None and norms[i] > 0:
                    atoms[j] = X[i] / norms[i]

    return atoms, supports, coef_rows, objective_history


def word_atoms(atomset: AtomSet, word: str) -> list[tuple[int, float]]:
    """A word's (atom_id, coefficient) pairs, by descending |coefficient|."""
    if word not in atomset.coeffs:
        raise KeyError(f"word {word!r} not in atom set")
    pairs = atomset.coeffs[word]
    return sorted(pairs, key=lambda p: (-abs(p[1]), p[0]))


def describe_atom(atomset: AtomSet, atom_id: int, table: EmbeddingTable, k: int = 10):
    """Nearest vocabulary words to one atom, as (word, cosine) pairs."""
    if not 0 <= atom_id < atomset.num_atoms:
        raise ValueError(f"atom id {atom_id} out of range [0, {atomset.num_atoms})")
    return nearest_words(table, atomset.atoms[atom_id], k)


def atom_report(atomset: AtomSet, table: EmbeddingTable, atom_ids, k: int = 5) -> str:
    """Two-column text table: atom id, nearest neighbor words."""
    lines = ["atom | nearest words", "-----+--------------"]
    for j in atom_ids:
        neighbors = describe_atom(atomset, j, table, k)
        lines.append(f"A_{j} | " + ", ".join(w for w, _ in neighbors))
    return "\n".join(lines)


def save_atoms(atomset: AtomSet, path) -> None:
    """Write the atom file: version comment, "m D sparsity" header, atom
    rows, then one "word j:coef ..." line per word."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# format: {ATOMS_FORMAT}\n")
        fh.write(f"{atomset.num_atoms} {atomset.dim} {atomset.sparsity}\n")
        for row in atomset.atoms:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")
        for word, pairs in atomset.coeffs.items():
            parts = [word] + [f"{j}:{repr(c)}" for j, c in pairs]
            fh.write(" ".join(parts) + "\n")


def load_atoms(path, table: EmbeddingTable | None = None) -> AtomSet:
    """Read an atom file; recomputes residual norms when `table` is given."""
    from .corpus import FormatError

    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    idx = 0
    if idx < len(lines) and lines[idx].startswith("#"):
        idx += 1
    if idx >= len(lines):
        raise FormatError(path, idx + 1, "missing atom header")
    parts = lines[idx].split()
    if len(parts) != 3:
        raise FormatError(path, idx + 1, f"expected 'm D sparsity', got {lines[idx]!r}")
    m, dim, sparsity = (int(p) for p in parts)
    idx += 1
    if idx + m > len(lines):
        raise FormatError(path, len(lines), f"expected {m} atom rows")
    atoms = np.empty((m, dim))
    for r in range(m):
        values = lines[idx + r].split()
        if len(values) != dim:
            raise FormatError(path, idx + r + 1, f"expected {dim} values, got {len(values)}")
        atoms[r] = [float(x) for x in values]
    idx += m
    coeffs: dict[str, list[tuple[int, float]]] = {}
    for off, line in enumerate(lines[idx:]):
        if not line.strip():
            continue
        fields = line.split()
        word, pairs = fields[0], []
        for f in fields[1:]:
            j, _, c = f.partition(":")
            pairs.append((int(j), float(c)))
        if word in coeffs:
            raise FormatError(path, idx + off + 1, f"duplicate word {word!r}")
        coeffs[word] = pairs

    residual_norms: dict[str, float] = {}
    if table is not None:
        for word, pairs in coeffs.items():
            if word not in table:
                continue
            rec = table.vector(word).copy()
            for j, c in pairs:
                rec = rec - c * atoms[j]
            residual_norms[word] = float(np.linalg.norm(rec))
    return AtomSet(atoms=atoms, coeffs=coeffs, residual_norms=residual_norms, sparsity=sparsity)
