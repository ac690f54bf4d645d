"""Embedding and dictionary corpus handling.

Loads text-format embedding tables and line-delimited dictionary files,
produces word-disjoint train/valid/test splits, and computes the basic
corpus statistics (word/entry/token counts, average definition length).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

POS_TAGS = ("noun", "verb", "adjective", "adverb", "other")

# WordNet-style tags normalize deterministically; anything unknown is "other".
POS_ALIASES = {
    "n": "noun",
    "v": "verb",
    "a": "adjective",
    "s": "adjective",
    "r": "adverb",
    "noun": "noun",
    "verb": "verb",
    "adjective": "adjective",
    "adverb": "adverb",
    "other": "other",
}

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class FormatError(ValueError):
    """Raised for malformed corpus/embedding files; message names the line."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


def normalize_pos(tag: str) -> str:
    """Map a raw POS tag to one of POS_TAGS via the alias table."""
    return POS_ALIASES.get(str(tag).strip().lower(), "other")


def tokenize(text: str) -> list[str]:
    """Lowercase, detach punctuation, split on whitespace.

    The single tokenization rule used everywhere in the package.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class DictEntry:
    """One dictionary record: target word, POS, definition token sequence."""

    word: str
    pos: str
    definition: tuple[str, ...]
    source: str = "unknown"
    sense_group: int | None = None

    def __post_init__(self):
        if self.pos not in POS_TAGS:
            raise ValueError(f"invalid pos {self.pos!r}; expected one of {POS_TAGS}")
        if len(self.definition) < 1:
            raise ValueError(f"empty definition for word {self.word!r}")


@dataclass
class CorpusSplit:
    """Word-disjoint train/valid/test partitions of a definition corpus."""

    train: list[DictEntry] = field(default_factory=list)
    valid: list[DictEntry] = field(default_factory=list)
    test: list[DictEntry] = field(default_factory=list)

    def parts(self):
        return {"train": self.train, "valid": self.valid, "test": self.test}


class EmbeddingTable:
    """Vocabulary of words mapped to dense vectors of a fixed dimension."""

    def __init__(self, dim: int, words, vectors):
        if dim <= 0:
            raise ValueError("embedding dimension must be positive")
        self.dim = int(dim)
        self.words = list(words)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        if self.vectors.shape != (len(self.words), self.dim):
            raise ValueError(
                f"vector matrix shape {self.vectors.shape} does not match "
                f"({len(self.words)}, {self.dim})"
            )
        self._index = {}
        for i, w in enumerate(self.words):
            if w in self._index:
                raise ValueError(f"duplicate word {w!r}")
            self._index[w] = i

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self._index

    def vector(self, word: str) -> np.ndarray:
        try:
            return self.vectors[self._index[word]]
        except KeyError:
            raise KeyError(f"word {word!r} not in embedding table") from None


def load_embeddings(path) -> EmbeddingTable:
    """Parse a text embedding file: header "<vocab> <dim>", one word per row."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise FormatError(path, 1, f"expected header '<vocab> <dim>', got {header.strip()!r}")
        try:
            vocab_size, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(path, 1, f"non-integer header fields {header.strip()!r}") from None
        if dim <= 0:
            raise FormatError(path, 1, f"dimension must be positive, got {dim}")

        words: list[str] = []
        rows: list[np.ndarray] = []
        seen: set[str] = set()
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.split()
            word = fields[0]
            if len(fields) - 1 != dim:
                raise FormatError(
                    path, line_no, f"expected {dim} values for {word!r}, got {len(fields) - 1}"
                )
            if word in seen:
                raise FormatError(path, line_no, f"duplicate word {word!r}")
            seen.add(word)
            try:
                vec = np.array([float(x) for x in fields[1:]], dtype=np.float64)
            except ValueError:
                raise FormatError(path, line_no, f"non-numeric value in row for {word!r}") from None
            words.append(word)
            rows.append(vec)

    if len(words) != vocab_size:
        raise FormatError(path, 1, f"header declares {vocab_size} words, file has {len(words)}")
    matrix = np.vstack(rows) if rows else np.zeros((0, dim))
    return EmbeddingTable(dim, words, matrix)


def save_embeddings(table: EmbeddingTable, path) -> None:
    """Write the text embedding format; floats use repr so load is exact."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for word, vec in zip(table.words, table.vectors):
            fh.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def load_dictionary(path) -> list[DictEntry]:
    """Load line-delimited JSON dictionary records, in file order.

    Each record needs word, pos and definition fields; source and
    sense_group are optional. Definitions may be raw text (tokenized here)
    or pre-tokenized lists; tokens are lowercased either way.
    """
    entries: list[DictEntry] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(path, line_no, f"invalid JSON: {exc.msg}") from None
            if record.get("format"):
                continue  # version header record
            for key in ("word", "pos", "definition"):
                if key not in record:
                    raise FormatError(path, line_no, f"missing field {key!r}")
            raw_def = record["definition"]
            if isinstance(raw_def, str):
                tokens = tokenize(raw_def)
            else:
                tokens = [str(t).lower() for t in raw_def]
            if not tokens:
                raise FormatError(path, line_no, "empty definition")
            sense_group = record.get("sense_group")
            entries.append(
                DictEntry(
                    word=str(record["word"]).lower(),
                    pos=normalize_pos(record["pos"]),
                    definition=tuple(tokens),
                    source=str(record.get("source", "unknown")),
                    sense_group=None if sense_group is None else int(sense_group),
                )
            )
    return entries


def save_dictionary(entries, path, format_tag: str | None = None) -> None:
    """Write entries as line-delimited JSON; optional version header record."""
    with open(path, "w", encoding="utf-8") as fh:
        if format_tag:
            fh.write(json.dumps({"format": format_tag}, sort_keys=True) + "\n")
        for e in entries:
            record = {
                "word": e.word,
                "pos": e.pos,
                "definition": list(e.definition),
                "source": e.source,
            }
            if e.sense_group is not None:
                record["sense_group"] = e.sense_group
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def split_corpus(entries, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> CorpusSplit:
    """Partition entries into word-disjoint train/valid/test splits.

    All entries of a word land in the same split. Sizes follow the
    largest-remainder allocation of distinct words to the three fractions;
    the assignment is a seeded shuffle, so it is deterministic per seed.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise ValueError("need exactly three fractions (train, valid, test)")
    if any(f <= 0 for f in fractions):
        raise ValueError("fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-8:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")

    words = sorted({e.word for e in entries})
    if len(words) < 3:
        raise ValueError(f"need at least 3 distinct words to split, got {len(words)}")

    rng = np.random.default_rng(seed)
    order = list(rng.permutation(len(words)))
    shuffled = [words[i] for i in order]

    n = len(words)
    exact = [f * n for f in fractions]
    counts = [int(x) for x in exact]
    remainders = [x - c for x, c in zip(exact, counts)]
    for _ in range(n - sum(counts)):
        i = max(range(3), key=lambda j: (remainders[j], -j))
        counts[i] += 1
        remainders[i] = -1.0

    train_words = set(shuffled[: counts[0]])
    valid_words = set(shuffled[counts[0] : counts[0] + counts[1]])
    split = CorpusSplit()
    for e in entries:
        if e.word in train_words:
            split.train.append(e)
        elif e.word in valid_words:
            split.valid.append(e)
        else:
            split.test.append(e)
    return split


def corpus_stats(part) -> tuple[int, int, int, float]:
    """(num_words, num_entries, num_tokens, avg_length) for one split part."""
    num_entries = len(part)
    num_words = len({e.word for e in part})
    num_tokens = sum(len(e.definition) for e in part)
    avg_length = num_tokens / num_entries if num_entries else 0.0
    return (num_words, num_entries, num_tokens, avg_length)


def stats_report(split: CorpusSplit) -> str:
    """Render the per-split statistics table (one column per split)."""
    names = ["train", "valid", "test"]
    stats = {name: corpus_stats(part) for name, part in split.parts().items()}
    rows = [
        ("#words", [str(stats[n][0]) for n in names]),
        ("#entries", [str(stats[n][1]) for n in names]),
        ("#tokens", [str(stats[n][2]) for n in names]),
        ("average length", [f"{stats[n][3]:.1f}" for n in names]),
    ]
    widths = [max(len(r[0]) for r in rows + [("splits", [])])] + [
        max(len(n), *(len(r[1][i]) for r in rows)) for i, n in enumerate(names)
    ]
    lines = ["  ".join(s.ljust(w) for s, w in zip(["splits"] + names, widths)).rstrip()]
    for label, values in rows:
        lines.append("  ".join(s.ljust(w) for s, w in zip([label] + values, widths)).rstrip())
    return "\n".join(lines)


def nearest_words(table: EmbeddingTable, query, k: int) -> list[tuple[str, float]]:
    """Top-k words by cosine similarity to `query`, ties broken alphabetically."""
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (table.dim,):
        raise ValueError(f"query length {query.shape} does not match dim {table.dim}")
    if k < 1:
        raise ValueError("k must be >= 1")
    qnorm = float(np.linalg.norm(query))
    if qnorm == 0.0:
        raise ValueError("zero-norm query vector")
    norms = np.linalg.norm(table.vectors, axis=1)
    sims = table.vectors @ query
    nonzero = norms > 0
    sims[nonzero] = sims[nonzero] / (norms[nonzero] * qnorm)
    sims[~nonzero] = 0.0
    order = sorted(range(len(table)), key=lambda i: (-sims[i], table.words[i]))
    return [(table.words[i], float(sims[i])) for i in order[: min(k, len(table))]]
