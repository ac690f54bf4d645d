import numpy as np
import pytest

from polydef.corpus import EmbeddingTable
from polydef.sparse import (
    AtomSet,
    DecompConfig,
    atom_report,
    describe_atom,
    fit_atoms,
    load_atoms,
    save_atoms,
    sparse_code,
    word_atoms,
)
from polydef.synthetic import sparse_problem


class TestSparseCode:
    def test_identity_basis_exact(self):
        atoms = np.eye(5)
        v = 2.0 * atoms[0] + 3.0 * atoms[1]
        picked = dict(sparse_code(v, atoms, sparsity=5))
        assert picked == {0: pytest.approx(2.0), 1: pytest.approx(3.0)}

    def test_orthogonal_vector_selects_nothing(self):
        atoms = np.eye(4)[:2]  # span e0, e1
        v = np.array([0.0, 0.0, 1.0, 0.5])
        assert sparse_code(v, atoms, sparsity=3) == []

    def test_exact_recovery_on_orthonormal_atoms(self):
        rng = np.random.default_rng(5)
        atoms = np.linalg.qr(rng.standard_normal((8, 8)))[0]
        for _ in range(20):
            support = rng.choice(8, size=3, replace=False)
            coefs = rng.uniform(0.5, 2.0, 3) * rng.choice([-1, 1], 3)
            v = coefs @ atoms[support]
            picked = dict(sparse_code(v, atoms, sparsity=3))
            assert set(picked) == set(int(j) for j in support)
            for j, c in zip(support, coefs):
                assert picked[int(j)] == pytest.approx(c, abs=1e-10)

    def test_residual_strictly_decreases_per_selection(self):
        rng = np.random.default_rng(9)
        atoms = rng.standard_normal((10, 6))
        atoms /= np.linalg.norm(atoms, axis=1, keepdims=True)
        v = rng.standard_normal(6)
        norms = []
        for budget in range(1, 6):
            picked = sparse_code(v, atoms, sparsity=budget)
            recon = sum(c * atoms[j] for j, c in picked)
            norms.append(np.linalg.norm(v - recon))
        assert all(b < a - 1e-12 for a, b in zip(norms, norms[1:]))

    def test_invalid_sparsity(self):
        with pytest.raises(ValueError):
            sparse_code(np.ones(3), np.eye(3), sparsity=0)


class TestDecompConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            DecompConfig(num_atoms=0)
        with pytest.raises(ValueError):
            DecompConfig(num_atoms=4, sparsity=5)
        with pytest.raises(ValueError):
            DecompConfig(num_atoms=4, sparsity=0)


class TestFitAtoms:
    def test_orthonormal_vocabulary_sparsity_one(self):
        rng = np.random.default_rng(2)
        basis = np.linalg.qr(rng.standard_normal((6, 6)))[0]
        table = EmbeddingTable(6, [f"w{i}" for i in range(6)], basis)
        atomset = fit_atoms(table, DecompConfig(num_atoms=6, sparsity=1, iterations=5, seed=0))
        for word in table.words:
            pairs = atomset.coeffs[word]
            assert len(pairs) == 1
            (j, coef), = pairs
            assert abs(abs(coef) - 1.0) < 1e-10
            assert atomset.residual_norms[word] < 1e-10

    def test_same_seed_bitwise_identical(self):
        table, *_ = sparse_problem(n_words=40, dim=12, num_atoms=10, sparsity=3, seed=4)
        cfg = DecompConfig(num_atoms=10, sparsity=3, iterations=8, seed=21)
        a = fit_atoms(table, cfg)
        b = fit_atoms(table, cfg)
        assert np.array_equal(a.atoms, b.atoms)
        assert a.coeffs == b.coeffs

    def test_jobs_match_serial(self):
        table, *_ = sparse_problem(n_words=30, dim=10, num_atoms=8, sparsity=3, seed=6)
        cfg = DecompConfig(num_atoms=8, sparsity=3, iterations=5, seed=1)
        serial = fit_atoms(table, cfg, jobs=1)
        parallel = fit_atoms(table, cfg, jobs=3)
        assert np.array_equal(serial.atoms, parallel.atoms)
        assert serial.coeffs == parallel.coeffs

    def test_recovery_small_scale(self):
        table, true_atoms, supports, _ = sparse_problem(
            n_words=150, dim=20, num_atoms=20, sparsity=3, noise=0.01, seed=13)
        atomset = fit_atoms(table, DecompConfig(num_atoms=20, sparsity=3,
                                                iterations=40, tol=1e-8, seed=2))
        sim = np.abs(atomset.atoms @ true_atoms.T)
        mapping, used = {}, set()
        for s, i, j in sorted(((sim[i, j], i, j) for i in range(20) for j in range(20)),
                              reverse=True):
            if i not in mapping and j not in used:
                mapping[i] = j
                used.add(j)
        recovered = sum(
            1 for w_i, w in enumerate(table.words)
            if {mapping[j] for j, _ in atomset.coeffs[w]} == supports[w_i])
        assert recovered / 150 >= 0.9

    def test_invariants_after_fit(self):
        table, *_ = sparse_problem(n_words=60, dim=12, num_atoms=10, sparsity=4, seed=8)
        atomset = fit_atoms(table, DecompConfig(num_atoms=10, sparsity=4,
                                                iterations=10, seed=5))
        norms = np.linalg.norm(atomset.atoms, axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-6)
        for i, word in enumerate(table.words):
            pairs = atomset.coeffs[word]
            assert len(pairs) <= 4
            recon = table.vector(word).copy()
            for j, c in pairs:
                recon = recon - c * atomset.atoms[j]
            assert abs(np.linalg.norm(recon) - atomset.residual_norms[word]) < 1e-10

    def test_objective_non_increasing(self):
        table, *_ = sparse_problem(n_words=80, dim=15, num_atoms=12, sparsity=3, seed=3)
        atomset = fit_atoms(table, DecompConfig(num_atoms=12, sparsity=3,
                                                iterations=15, tol=0.0, seed=9))
        hist = atomset.objective_history
        assert len(hist) >= 2
        assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))

    def test_empty_table_errors(self):
        table = EmbeddingTable(3, [], np.zeros((0, 3)))
        with pytest.raises(ValueError, match="empty"):
            fit_atoms(table, DecompConfig(num_atoms=2, sparsity=1))

    def test_too_many_atoms_errors(self):
        table = EmbeddingTable(2, ["a"], [[1.0, 0.0]])
        with pytest.raises(ValueError, match="exceeds"):
            fit_atoms(table, DecompConfig(num_atoms=3, sparsity=2))


class TestWordAtoms:
    def test_ordering_by_abs_coefficient(self):
        atomset = AtomSet(atoms=np.eye(8), coeffs={"w": [(3, 0.9), (7, -1.2)]},
                          sparsity=5)
        assert word_atoms(atomset, "w") == [(7, -1.2), (3, 0.9)]

    def test_singleton(self):
        atomset = AtomSet(atoms=np.eye(4), coeffs={"w": [(2, 0.5)]}, sparsity=1)
        assert word_atoms(atomset, "w") == [(2, 0.5)]

    def test_unknown_word(self):
        atomset = AtomSet(atoms=np.eye(2), coeffs={}, sparsity=1)
        with pytest.raises(KeyError):
            word_atoms(atomset, "missing")

    def test_length_bounded_by_sparsity(self):
        table, *_ = sparse_problem(n_words=50, dim=12, num_atoms=10, sparsity=5, seed=1)
        atomset = fit_atoms(table, DecompConfig(num_atoms=10, sparsity=5,
                                                iterations=5, seed=0))
        for word in table.words:
            assert len(word_atoms(atomset, word)) <= 5


class TestDescribeAtom:
    def test_atom_equal_to_vocab_vector(self):
        table = EmbeddingTable(3, ["x", "y", "z"], np.eye(3))
        atomset = AtomSet(atoms=np.eye(3), coeffs={}, sparsity=1)
        (top, sim), *_ = describe_atom(atomset, 1, table, k=2)
        assert top == "y"
        assert sim == pytest.approx(1.0)

    def test_k_exceeds_vocab(self):
        table = EmbeddingTable(2, ["x", "y"], np.eye(2))
        atomset = AtomSet(atoms=np.eye(2), coeffs={}, sparsity=1)
        assert len(describe_atom(atomset, 0, table, k=99)) == 2

    def test_invalid_id(self):
        atomset = AtomSet(atoms=np.eye(2), coeffs={}, sparsity=1)
        table = EmbeddingTable(2, ["x"], [[1.0, 0.0]])
        with pytest.raises(ValueError, match="out of range"):
            describe_atom(atomset, 5, table, k=1)

    def test_report_two_column_layout(self):
        table = EmbeddingTable(2, ["left", "right"], np.eye(2))
        atomset = AtomSet(atoms=np.eye(2), coeffs={}, sparsity=1)
        report = atom_report(atomset, table, [0, 1], k=1)
        lines = report.splitlines()
        assert lines[0].startswith("atom | nearest words")
        assert lines[2] == "A_0 | left"
        assert lines[3] == "A_1 | right"


class TestAtomFileIO:
    def test_roundtrip_byte_identical(self, tmp_path):
        table, *_ = sparse_problem(n_words=20, dim=8, num_atoms=6, sparsity=2, seed=7)
        atomset = fit_atoms(table, DecompConfig(num_atoms=6, sparsity=2,
                                                iterations=4, seed=3))
        p1, p2 = tmp_path / "a1.txt", tmp_path / "a2.txt"
        save_atoms(atomset, p1)
        loaded = load_atoms(p1, table=table)
        save_atoms(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert loaded.coeffs == atomset.coeffs
        assert np.array_equal(loaded.atoms, atomset.atoms)
        for w in table.words:
            assert loaded.residual_norms[w] == pytest.approx(
                atomset.residual_norms[w], abs=1e-12)

    def test_header_format(self, tmp_path):
        atomset = AtomSet(atoms=np.eye(3), coeffs={"w": [(0, 1.0)]}, sparsity=2)
        path = tmp_path / "atoms.txt"
        save_atoms(atomset, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# format: polydef/atoms/")
        assert lines[1] == "3 3 2"
