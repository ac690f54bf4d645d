"""Token vocabulary with the special markers used by the generator."""

from __future__ import annotations

from collections import Counter

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
SPECIALS = (PAD, UNK, BOS, EOS)
PAD_ID, UNK_ID, BOS_ID, EOS_ID = 0, 1, 2, 3


class TokenVocab:
    def __init__(self, tokens):
        self._tokens = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self._index = {t: i for i, t in enumerate(self._tokens)}
        if len(self._index) != len(self._tokens):
            raise ValueError("duplicate tokens in vocabulary")

    @classmethod
    def build(cls, entries, min_freq: int = 2) -> "TokenVocab":
        """Vocabulary of definition tokens with frequency >= min_freq."""
        counts = Counter(t for e in entries for t in e.definition)
        kept = sorted(t for t, c in counts.items() if c >= min_freq)
        return cls(kept)

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._index

    def id(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def ids(self, tokens) -> list[int]:
        return [self.id(t) for t in tokens]

    def token(self, i: int) -> str:
        return self._tokens[i]

    def tokens(self) -> list[str]:
        return list(self._tokens)
