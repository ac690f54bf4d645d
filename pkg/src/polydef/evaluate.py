"""Automated and manual-label evaluation of generated definition sets.

BLEU measures output quality against ground truths; rBLEU reverses the
hypothesis/reference roles so coverage of distinct senses is rewarded;
fBLEU is their harmonic mean. Also houses the comparison baselines
(nearest-embedding, shuffled-corpus, single-sense variants) and the
precision/recall arithmetic over human category labels, with a scoring-
scheme sensitivity sweep.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import DictEntry, EmbeddingTable

logger = logging.getLogger(__name__)

LABELS_FORMAT = "polydef/labels/1"

CATEGORIES = ("I", "II", "III", "IV")


@dataclass
class BleuConfig:
    max_order: int = 4
    epsilon: float = 0.01  # replaces zero n-gram match counts
    brevity_penalty: bool = True

    def __post_init__(self):
        if self.max_order < 1:
            raise ValueError("max_order must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class LabelRecord:
    word: str
    tokens: tuple[str, ...]
    category: str  # I: correct .. IV: completely wrong
    sense_group: int | None = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"category must be one of {CATEGORIES}")


@dataclass
class ScoreScheme:
    a: float = 0.6  # category II
    b: float = 0.3  # category III

    def __post_init__(self):
        if not (1.0 > self.a > self.b > 0.0):
            raise ValueError("scores must satisfy 1 > a > b > 0")

    def score(self, category: str) -> float:
        return {"I": 1.0, "II": self.a, "III": self.b, "IV": 0.0}[category]


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _bleu_single(hyp, ref, cfg: BleuConfig) -> float:
    """Modified n-gram precision BLEU of hyp against one reference."""
    orders = min(cfg.max_order, len(hyp))
    log_sum = 0.0
    for n in range(1, orders + 1):
        hyp_counts = _ngrams(hyp, n)
        ref_counts = _ngrams(ref, n)
        matches = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        total = max(len(hyp) - n + 1, 1)
        numerator = matches if matches > 0 else cfg.epsilon
        log_sum += np.log(numerator / total)
    score = float(np.exp(log_sum / orders))
    if cfg.brevity_penalty and len(hyp) < len(ref):
        score *= float(np.exp(1.0 - len(ref) / len(hyp)))
    return score


def sentence_bleu(hyp, refs, cfg: BleuConfig | None = None) -> float:
    """Max over references of smoothed sentence BLEU.

    Orders above min(max_order, len(hyp)) are excluded; zero-match orders
    use the additive epsilon in place of the match count; the brevity
    penalty applies per reference.
    """
    cfg = cfg or BleuConfig()
    hyp = list(hyp)
    refs = [list(r) for r in refs]
    if not hyp:
        raise ValueError("empty hypothesis")
    if not refs:
        raise ValueError("need at least one reference")
    return max(_bleu_single(hyp, ref, cfg) for ref in refs)


def corpus_bleu(outputs_by_word: dict, truths_by_word: dict,
                cfg: BleuConfig | None = None) -> float:
    """Per word, mean over outputs of max-over-truths BLEU; then mean over words.

    Words missing outputs or truths are skipped with a warning.
    """
    cfg = cfg or BleuConfig()
    per_word = []
    for word in sorted(outputs_by_word):
        outputs = outputs_by_word[word]
        truths = truths_by_word.get(word, [])
        if not outputs or not truths:
            logger.warning("skipping word %r: missing outputs or ground truths", word)
            continue
        per_word.append(float(np.mean([sentence_bleu(o, truths, cfg) for o in outputs])))
    if not per_word:
        raise ValueError("no scorable words")
    return float(np.mean(per_word))


def rbleu(outputs_by_word: dict, truths_by_word: dict,
          cfg: BleuConfig | None = None) -> float:
    """Role-reversed BLEU: ground truths scored as hypotheses against the
    model outputs, mean per word then mean over words. Recall-like."""
    cfg = cfg or BleuConfig()
    per_word = []
    for word in sorted(truths_by_word):
        truths = truths_by_word[word]
        outputs = outputs_by_word.get(word, [])
        if not outputs or not truths:
            logger.warning("skipping word %r: missing outputs or ground truths", word)
            continue
        per_word.append(float(np.mean([sentence_bleu(t, outputs, cfg) for t in truths])))
    if not per_word:
        raise ValueError("no scorable words")
    return float(np.mean(per_word))


def fbleu(b: float, r: float) -> float:
    """Harmonic mean of BLEU and rBLEU; 0 when both are 0."""
    if b < 0 or r < 0:
        raise ValueError("scores must be nonnegative")
    if b + r == 0:
        return 0.0
    return 2.0 * b * r / (b + r)


# -- baselines ---------------------------------------------------------------


def baseline_ne(word: str, train_entries, table: EmbeddingTable,
                cap: int | None = None, seed: int = 0) -> list[tuple[str, ...]]:
    """Definitions of the training word nearest (cosine) to the target.

    The target word itself never counts as its own neighbor. With `cap`,
    a seeded sample of that many definitions is returned instead of all.
    """
    if word not in table:
        raise KeyError(f"word {word!r} not in embedding table")
    candidates = sorted({e.word for e in train_entries if e.word != word and e.word in table})
    if not candidates:
        raise ValueError("no training word with an embedding")
    target = table.vector(word)
    tnorm = np.linalg.norm(target)
    if tnorm == 0:
        raise ValueError("zero-norm target embedding")

    def cosine(w):
        v = table.vector(w)
        n = np.linalg.norm(v)
        return float(v @ target / (n * tnorm)) if n > 0 else 0.0

    neighbor = min(candidates, key=lambda w: (-cosine(w), w))
    defs = [e.definition for e in train_entries if e.word == neighbor]
    if cap is not None and cap < len(defs):
        rng = np.random.default_rng(seed)
        idx = sorted(rng.choice(len(defs), size=cap, replace=False))
        defs = [defs[i] for i in idx]
    return defs


def baseline_random(entries, seed: int = 0) -> list[DictEntry]:
    """Shuffle which definition belongs to which entry (pure permutation).

    The multiset of definitions is preserved; fixed points are allowed.
    The result feeds the standard training pipeline as a floor baseline.
    """
    entries = list(entries)
    if len(entries) < 2:
        raise ValueError("need at least 2 entries to shuffle")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(entries))
    return [
        DictEntry(word=e.word, pos=e.pos, definition=entries[perm[i]].definition,
                  source=e.source, sense_group=e.sense_group)
        for i, e in enumerate(entries)
    ]


@dataclass
class SingleSenseVariant:
    """Decoding recipe for the single-sense comparison models.

    The underlying model is trained with the atom slice of the conditioning
    vector fixed at zero (width unchanged). The starred variant decodes a
    beam and keeps the top scored outputs instead of one greedy output.
    """

    star: bool = False
    beam_width: int = 3

    @property
    def n_outputs(self) -> int:
        return min(3, self.beam_width) if self.star else 1


def w2def_variant(star: bool = False, beam_width: int = 3) -> SingleSenseVariant:
    if star and beam_width < 3:
        raise ValueError("starred variant needs beam width >= 3")
    return SingleSenseVariant(star=star, beam_width=beam_width)


def single_sense_outputs(model, word: str, pos: str, variant: SingleSenseVariant,
                         max_len: int = 30):
    """Generate the variant's outputs for one word, sorted by score."""
    from .define import generate, generate_beam

    if not model.zero_atom:
        raise ValueError("single-sense decoding requires a zero-atom model")
    if variant.star:
        return generate_beam(model, word, None, pos, max_len=max_len,
                             beam_width=variant.beam_width, n_best=variant.n_outputs)
    return [generate(model, word, None, pos, max_len=max_len)]


# -- manual labels -----------------------------------------------------------


def manual_precision_recall(labels, truth_groups_by_word: dict,
                            scheme: ScoreScheme | None = None):
    """Precision/recall from category labels, per word and macro-averaged.

    Per word: precision is the mean category score over outputs; recall
    sums, over ground-truth sense groups, the max score among outputs
    matched to that group, divided by the number of groups. Returns
    (per_word dict, macro precision, macro recall).
    """
    scheme = scheme or ScoreScheme()
    by_word: dict[str, list[LabelRecord]] = {}
    for rec in labels:
        by_word.setdefault(rec.word, []).append(rec)
    per_word = {}
    for word in sorted(by_word):
        records = by_word[word]
        groups = truth_groups_by_word.get(word)
        if not groups:
            raise ValueError(f"word {word!r} has labels but no ground-truth sense groups")
        groups = set(groups)
        for rec in records:
            if rec.sense_group is not None and rec.sense_group not in groups:
                raise ValueError(
                    f"label for {word!r} references unknown sense group {rec.sense_group}")
        scores = [scheme.score(r.category) for r in records]
        precision = float(np.mean(scores))
        best_per_group = {}
        for rec in records:
            if rec.sense_group is None:
                continue
            s = scheme.score(rec.category)
            best_per_group[rec.sense_group] = max(best_per_group.get(rec.sense_group, 0.0), s)
        recall = sum(best_per_group.values()) / len(groups)
        per_word[word] = (precision, recall)
    if not per_word:
        raise ValueError("no labeled words")
    macro_p = float(np.mean([p for p, _ in per_word.values()]))
    macro_r = float(np.mean([r for _, r in per_word.values()]))
    return per_word, macro_p, macro_r


def sensitivity_sweep(labels_by_model: dict, truth_groups_by_word: dict,
                      grid) -> tuple[list[dict], bool]:
    """Recompute precision/recall for every scheme in `grid`.

    Returns (rows, stable) where rows carry (a, b, model, precision,
    recall) and `stable` is True iff the model orderings by precision and
    by recall are each identical across all grid points.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty scheme grid")
    rows = []
    p_orders, r_orders = set(), set()
    for scheme in grid:
        results = {}
        for model_name in sorted(labels_by_model):
            _, p, r = manual_precision_recall(labels_by_model[model_name],
                                              truth_groups_by_word, scheme)
            results[model_name] = (p, r)
            rows.append({"a": scheme.a, "b": scheme.b, "model": model_name,
                         "precision": p, "recall": r})
        p_orders.add(tuple(sorted(results, key=lambda m: (-results[m][0], m))))
        r_orders.add(tuple(sorted(results, key=lambda m: (-results[m][1], m))))
    stable = len(p_orders) == 1 and len(r_orders) == 1
    return rows, stable


def scheme_grid(start: float = 0.1, stop: float = 0.9, step: float = 0.1):
    """All (a, b) schemes on the grid with 1 > a > b > 0."""
    values = np.round(np.arange(start, stop + 1e-9, step), 10)
    grid = []
    for a in values:
        for b in values:
            if 1.0 > a > b > 0.0:
                grid.append(ScoreScheme(a=float(a), b=float(b)))
    return grid


def atom_feature_table(atomset, table: EmbeddingTable, truths_by_word: dict,
                       pos_by_atom: dict | None = None,
                       word_freq: dict | None = None) -> list[dict]:
    """Per-(word, atom) feature rows for external error analysis.

    Exports word frequency, ground-truth definition count, embedding norm,
    atom coefficient, and (when given) the atom's inferred POS. No model is
    fit here; the table is for downstream consumers.
    """
    rows = []
    for word in sorted(atomset.coeffs):
        if word not in table:
            continue
        norm = float(np.linalg.norm(table.vector(word)))
        truth_count = len(truths_by_word.get(word, []))
        for atom_id, coef in sorted(atomset.coeffs[word]):
            rows.append({
                "word": word,
                "atom_id": atom_id,
                "atom_weight": coef,
                "embedding_norm": norm,
                "truth_definitions": truth_count,
                "word_frequency": (word_freq or {}).get(word, 0),
                "atom_pos": (pos_by_atom or {}).get(atom_id, ""),
            })
    return rows


# -- label file IO -----------------------------------------------------------


def read_labels(path) -> dict[str, list[LabelRecord]]:
    """Line-delimited label records grouped by their model field."""
    by_model: dict[str, list[LabelRecord]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("format"):
                continue
            rec = LabelRecord(
                word=record["word"],
                tokens=tuple(record.get("tokens", ())),
                category=record["category"],
                sense_group=record.get("sense_group"),
            )
            by_model.setdefault(record.get("model", "model"), []).append(rec)
    return by_model


def write_labels(labels_by_model: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": LABELS_FORMAT}, sort_keys=True) + "\n")
        for model_name in sorted(labels_by_model):
            for rec in labels_by_model[model_name]:
                record = {"model": model_name, "word": rec.word,
                          "tokens": list(rec.tokens), "category": rec.category}
                if rec.sense_group is not None:
                    record["sense_group"] = rec.sense_group
                fh.write(json.dumps(record, sort_keys=True) + "\n")
