"""Test-time cleanup of generated definition sets.

Infers a POS per atom by neighbor vote, merges near-duplicate outputs
whose symmetric BLEU exceeds a threshold (single-linkage components), and
keeps the highest-likelihood member of each group as its representative.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

from .corpus import POS_TAGS, EmbeddingTable, nearest_words
from .define import DefinitionOutput
from .evaluate import BleuConfig, sentence_bleu

logger = logging.getLogger(__name__)

MERGED_FORMAT = "polydef/merged/1"


@dataclass
class MergedOutputs:
    groups: list[list[DefinitionOutput]]
    representatives: list[DefinitionOutput]


def build_pos_lexicon(entries) -> dict[str, str]:
    """Most frequent POS per word; ties break in POS_TAGS order."""
    counts: dict[str, Counter] = {}
    for e in entries:
        counts.setdefault(e.word, Counter())[e.pos] += 1
    return {
        w: min(c, key=lambda p: (-c[p], POS_TAGS.index(p)))
        for w, c in counts.items()
    }


def infer_pos(atom_vector, table: EmbeddingTable, pos_lexicon: dict[str, str],
              k: int = 20) -> str:
    """Majority POS among the atom's k nearest neighbors found in the lexicon.

    Ties resolve to the POS of the nearest neighbor holding one of the tied
    tags. Falls back to "noun" with a warning when no neighbor is covered.
    """
    neighbors = nearest_words(table, atom_vector, k)
    tagged = [(w, pos_lexicon[w]) for w, _ in neighbors if w in pos_lexicon]
    if not tagged:
        logger.warning("no nearest neighbor found in POS lexicon; defaulting to noun")
        return "noun"
    counts = Counter(pos for _, pos in tagged)
    top = max(counts.values())
    tied = {pos for pos, c in counts.items() if c == top}
    if len(tied) == 1:
        return next(iter(tied))
    for _, pos in tagged:  # nearest neighbor among the tied classes decides
        if pos in tied:
            return pos
    raise AssertionError("unreachable")


def symmetric_bleu(tokens_a, tokens_b, cfg: BleuConfig | None = None) -> float:
    """Average of sentence BLEU in both directions between two outputs."""
    tokens_a, tokens_b = list(tokens_a), list(tokens_b)
    if not tokens_a or not tokens_b:
        raise ValueError("both token sequences must be nonempty")
    cfg = cfg or BleuConfig()
    return 0.5 * (sentence_bleu(tokens_a, [tokens_b], cfg)
                  + sentence_bleu(tokens_b, [tokens_a], cfg))


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def merge_outputs(outputs, threshold: float = 0.6,
                  cfg: BleuConfig | None = None) -> MergedOutputs:
    """Group outputs whose pairwise symmetric BLEU exceeds `threshold`.

    Similarity is computed on surface tokens (terminal end marker
    stripped). Groups are single-linkage connected components, ordered by
    first appearance; each representative is the member with the highest
    score (ties: lowest atom id, then input order).
    """
    outputs = list(outputs)
    if not outputs:
        return MergedOutputs(groups=[], representatives=[])
    cfg = cfg or BleuConfig()
    n = len(outputs)
    uf = _UnionFind(n)
    surfaces = [list(o.surface_tokens) or list(o.tokens) for o in outputs]
    for i in range(n):
        for j in range(i + 1, n):
            if symmetric_bleu(surfaces[i], surfaces[j], cfg) > threshold:
                uf.union(i, j)
    members: dict[int, list[int]] = {}
    for i in range(n):
        members.setdefault(uf.find(i), []).append(i)
    groups = []
    representatives = []
    for root in sorted(members, key=lambda r: min(members[r])):
        idx = members[root]
        groups.append([outputs[i] for i in idx])
        best = min(idx, key=lambda i: (-outputs[i].score, outputs[i].atom_id, i))
        representatives.append(outputs[best])
    return MergedOutputs(groups=groups, representatives=representatives)
