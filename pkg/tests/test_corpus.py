import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polydef.corpus import (
    CorpusSplit,
    DictEntry,
    EmbeddingTable,
    FormatError,
    corpus_stats,
    load_dictionary,
    load_embeddings,
    nearest_words,
    normalize_pos,
    save_dictionary,
    save_embeddings,
    split_corpus,
    stats_report,
    tokenize,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestTokenize:
    def test_lowercase_and_split(self):
        assert tokenize("A Storage Compartment") == ["a", "storage", "compartment"]

    def test_punctuation_detached(self):
        assert tokenize("storage compartment.") == ["storage", "compartment", "."]
        assert tokenize("well-known (idea)") == ["well", "-", "known", "(", "idea", ")"]


class TestPosAliases:
    @pytest.mark.parametrize("raw,expected", [
        ("n", "noun"), ("v", "verb"), ("a", "adjective"), ("s", "adjective"),
        ("r", "adverb"), ("noun", "noun"), ("VERB", "verb"), ("xyz", "other"),
    ])
    def test_alias_map(self, raw, expected):
        assert normalize_pos(raw) == expected


class TestLoadEmbeddings:
    def test_basic_parse(self, tmp_path):
        path = write(tmp_path / "emb.txt", "2 3\na 1 0 0\nb 0 1 0\n")
        table = load_embeddings(path)
        assert table.dim == 3
        assert len(table) == 2
        assert table.words == ["a", "b"]
        assert np.array_equal(table.vector("a"), [1.0, 0.0, 0.0])

    def test_short_row_errors_with_line(self, tmp_path):
        path = write(tmp_path / "emb.txt", "2 3\na 1 0 0\nb 0 1\n")
        with pytest.raises(FormatError, match=r":3:"):
            load_embeddings(path)

    def test_duplicate_word(self, tmp_path):
        path = write(tmp_path / "emb.txt", "2 2\na 1 0\na 0 1\n")
        with pytest.raises(FormatError, match="duplicate"):
            load_embeddings(path)

    def test_header_count_mismatch(self, tmp_path):
        path = write(tmp_path / "emb.txt", "3 2\na 1 0\nb 0 1\n")
        with pytest.raises(FormatError, match="declares 3"):
            load_embeddings(path)

    def test_bad_header(self, tmp_path):
        path = write(tmp_path / "emb.txt", "hello\n")
        with pytest.raises(FormatError, match=":1:"):
            load_embeddings(path)

    def test_roundtrip_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        table = EmbeddingTable(4, ["alpha", "beta", "gamma"], rng.standard_normal((3, 4)))
        path = tmp_path / "emb.txt"
        save_embeddings(table, path)
        loaded = load_embeddings(path)
        assert loaded.words == table.words
        assert np.array_equal(loaded.vectors, table.vectors)


class TestLoadDictionary:
    def test_single_record(self, tmp_path):
        path = write(tmp_path / "d.jsonl",
                     '{"word": "cabinet", "pos": "noun", "definition": "a storage compartment"}\n')
        entries = load_dictionary(path)
        assert len(entries) == 1
        assert entries[0].word == "cabinet"
        assert entries[0].definition == ("a", "storage", "compartment")

    def test_pos_alias_normalized(self, tmp_path):
        path = write(tmp_path / "d.jsonl",
                     '{"word": "run", "pos": "n", "definition": "a jog"}\n')
        assert load_dictionary(path)[0].pos == "noun"

    def test_empty_definition_errors(self, tmp_path):
        path = write(tmp_path / "d.jsonl",
                     '{"word": "x", "pos": "noun", "definition": ""}\n')
        with pytest.raises(FormatError, match=r":1: empty definition"):
            load_dictionary(path)

    def test_missing_field_errors(self, tmp_path):
        path = write(tmp_path / "d.jsonl", '{"word": "x", "definition": "a thing"}\n')
        with pytest.raises(FormatError, match="missing field 'pos'"):
            load_dictionary(path)

    def test_tokens_lowercased_and_order_preserved(self, tmp_path):
        path = write(
            tmp_path / "d.jsonl",
            '{"word": "B", "pos": "verb", "definition": "To Act"}\n'
            '{"word": "a", "pos": "noun", "definition": ["Pre", "Tokenized"]}\n')
        entries = load_dictionary(path)
        assert [e.word for e in entries] == ["b", "a"]
        assert entries[0].definition == ("to", "act")
        assert entries[1].definition == ("pre", "tokenized")

    def test_roundtrip(self, tmp_path):
        entries = [
            DictEntry("fork", "noun", ("a", "pronged", "tool"), "wordnet", 2),
            DictEntry("fork", "verb", ("to", "divide"), "oed"),
        ]
        path = tmp_path / "d.jsonl"
        save_dictionary(entries, path)
        assert load_dictionary(path) == entries


def _corpus(words, defs_per_word=2):
    entries = []
    for w in words:
        for i in range(defs_per_word):
            entries.append(DictEntry(w, "noun", ("sense", f"s{i}", "of", w)))
    return entries


class TestSplitCorpus:
    def test_ten_words_8_1_1(self):
        entries = _corpus([f"w{i}" for i in range(10)])
        split = split_corpus(entries, (0.8, 0.1, 0.1), seed=7)
        words = {name: {e.word for e in part} for name, part in split.parts().items()}
        assert len(words["train"]) == 8
        assert len(words["valid"]) == 1
        assert len(words["test"]) == 1
        assert not words["train"] & words["valid"]
        assert not words["train"] & words["test"]
        assert not words["valid"] & words["test"]

    def test_deterministic(self):
        entries = _corpus([f"w{i}" for i in range(10)])
        a = split_corpus(entries, (0.8, 0.1, 0.1), seed=7)
        b = split_corpus(entries, (0.8, 0.1, 0.1), seed=7)
        assert a.train == b.train and a.valid == b.valid and a.test == b.test

    def test_too_few_words(self):
        with pytest.raises(ValueError, match="at least 3"):
            split_corpus(_corpus(["a", "b"]), (0.8, 0.1, 0.1), seed=0)

    @pytest.mark.parametrize("fractions", [(0.5, 0.5), (0.5, 0.3, 0.1),
                                           (-0.1, 0.6, 0.5), (0.0, 0.5, 0.5)])
    def test_bad_fractions(self, fractions):
        with pytest.raises(ValueError):
            split_corpus(_corpus(["a", "b", "c", "d"]), fractions, seed=0)

    @settings(max_examples=50, deadline=None)
    @given(
        n_words=st.integers(min_value=3, max_value=40),
        seed=st.integers(min_value=0, max_value=2**31),
        cuts=st.tuples(st.floats(0.05, 0.9), st.floats(0.05, 0.9)),
    )
    def test_word_disjointness_property(self, n_words, seed, cuts):
        lo, hi = sorted(cuts)
        fractions = (lo, max(hi - lo, 0.01), max(1.0 - max(hi, lo + 0.01), 0.01))
        total = sum(fractions)
        fractions = tuple(f / total for f in fractions)
        entries = _corpus([f"w{i}" for i in range(n_words)], defs_per_word=3)
        split = split_corpus(entries, fractions, seed=seed)
        parts = split.parts()
        seen = {}
        for name, part in parts.items():
            for e in part:
                assert seen.setdefault(e.word, name) == name
        assert sum(len(p) for p in parts.values()) == len(entries)


class TestCorpusStats:
    def test_empty(self):
        assert corpus_stats([]) == (0, 0, 0, 0.0)

    def test_two_entries_same_word(self):
        entries = [
            DictEntry("w", "noun", tuple("abcd")),
            DictEntry("w", "verb", tuple("abcdef")),
        ]
        assert corpus_stats(entries) == (1, 2, 10, 5.0)

    def test_token_count_is_sum_of_lengths(self):
        entries = _corpus(["x", "y", "z"], defs_per_word=2)
        stats = corpus_stats(entries)
        assert stats[2] == sum(len(e.definition) for e in entries)

    def test_report_layout(self):
        split = CorpusSplit(train=_corpus(["a", "b"]), valid=_corpus(["c"]),
                            test=_corpus(["d"]))
        report = stats_report(split)
        lines = report.splitlines()
        assert lines[0].split() == ["splits", "train", "valid", "test"]
        assert [ln.split()[0] for ln in lines[1:]] == ["#words", "#entries", "#tokens", "average"]
        assert len(lines) == 5


class TestNearestWords:
    def test_orthonormal_exact(self):
        table = EmbeddingTable(2, ["a", "b"], np.eye(2))
        assert nearest_words(table, [1.0, 0.0], k=1) == [("a", 1.0)]

    def test_symmetric_query_ties_lexicographic(self):
        table = EmbeddingTable(2, ["b", "a"], np.eye(2))
        result = nearest_words(table, [1.0, 1.0], k=2)
        assert [w for w, _ in result] == ["a", "b"]
        assert all(abs(s - 1 / np.sqrt(2)) < 1e-12 for _, s in result)

    def test_zero_query_errors(self):
        table = EmbeddingTable(2, ["a"], [[1.0, 0.0]])
        with pytest.raises(ValueError, match="zero-norm"):
            nearest_words(table, [0.0, 0.0], k=1)

    def test_k_larger_than_vocab(self):
        table = EmbeddingTable(2, ["a", "b"], np.eye(2))
        assert len(nearest_words(table, [1.0, 0.5], k=10)) == 2

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(3)
        vectors = rng.standard_normal((30, 6))
        table = EmbeddingTable(6, [f"w{i:02d}" for i in range(30)], vectors)
        for trial in range(10):
            query = rng.standard_normal(6)
            got = nearest_words(table, query, k=7)
            sims = {}
            for i, w in enumerate(table.words):
                v = vectors[i]
                sims[w] = float(v @ query / (np.linalg.norm(v) * np.linalg.norm(query)))
            expect = sorted(sims, key=lambda w: (-sims[w], w))[:7]
            assert [w for w, _ in got] == expect
            for w, s in got:
                assert s == pytest.approx(sims[w], abs=1e-12)
            sims_list = [s for _, s in got]
            assert sims_list == sorted(sims_list, reverse=True)
