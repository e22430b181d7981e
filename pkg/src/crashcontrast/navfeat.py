"""TF-IDF n-gram features from navigation logs.

A navigation log is the ordered list of app surfaces a user visited before a
crash. Each consecutive n-event window is a gram; its weight in a log is the
raw in-log count times a rarity weight computed over the whole corpus.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import CONTINUOUS, Column

Gram = tuple[str, ...]
ARROW = "->"


def extract_ngrams(log: Sequence[str], n: int = 2) -> Counter:
    """Multiset of consecutive ``n``-event windows in ``log``."""
    if n < 2:
        raise ValueError("gram length must be >= 2")
    return Counter(tuple(log[i:i + n]) for i in range(len(log) - n + 1))


def idf(doc_count: int, df: int) -> float:
    """ln((N - f + 0.5) / (f + 0.5)) clamped at zero."""
    return max(0.0, math.log((doc_count - df + 0.5) / (df + 0.5)))


def gram_name(gram: Gram) -> str:
    return ARROW.join(gram)


def parse_gram(name: str) -> Gram:
    return tuple(name.split(ARROW))


@dataclass(frozen=True)
class NGramVocabulary:
    n: int
    grams: tuple[Gram, ...]
    df: tuple[int, ...]
    idf: tuple[float, ...]
    doc_count: int

    def __post_init__(self):
        object.__setattr__(self, "_pos", {g: i for i, g in enumerate(self.grams)})

    def __len__(self):
        return len(self.grams)

    def __contains__(self, gram) -> bool:
        return tuple(gram) in self._pos

    def index(self, gram: Gram) -> int:
        return self._pos[tuple(gram)]

    def weight(self, gram: Gram) -> float:
        return self.idf[self._pos[tuple(gram)]]

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "doc_count": self.doc_count,
            "grams": [{"gram": gram_name(g), "f": f, "idf": w}
                      for g, f, w in zip(self.grams, self.df, self.idf)],
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "NGramVocabulary":
        doc = json.loads(text)
        entries = doc["grams"]
        return cls(doc["n"], tuple(parse_gram(e["gram"]) for e in entries),
                   tuple(e["f"] for e in entries), tuple(e["idf"] for e in entries), doc["doc_count"])

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


def document_frequency(logs: Iterable[Sequence[str]], n: int) -> Counter:
    counts: Counter = Counter()
    for log in logs:
        counts.update(extract_ngrams(log, n).keys())
    return counts


def build_vocabulary(logs: Sequence[Sequence[str]], n: int = 2, min_df: int = 5) -> NGramVocabulary:
    """Grams found in at least ``min_df`` logs, ordered lexicographically."""
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    if len(logs) == 0:
        raise ValueError("cannot build a vocabulary from an empty log collection")
    counts = document_frequency(logs, n)
    doc_count = len(logs)
    grams = tuple(sorted(g for g, f in counts.items() if f >= min_df))
    dfs = tuple(counts[g] for g in grams)
    return NGramVocabulary(n, grams, dfs, tuple(idf(doc_count, f) for f in dfs), doc_count)


@dataclass(frozen=True)
class FeatureMatrix:
    """Row-aligned TF-IDF weights, one column per vocabulary gram."""

    vocabulary: NGramVocabulary
    weights: np.ndarray  # (n_logs, n_grams)

    @property
    def names(self) -> list[str]:
        return [gram_name(g) for g in self.vocabulary.grams]

    def columns(self) -> list[Column]:
        return [Column(name, CONTINUOUS, self.weights[:, j]) for j, name in enumerate(self.names)]


def vectorize(logs: Sequence[Sequence[str]], vocab: NGramVocabulary) -> FeatureMatrix:
    if len(vocab) == 0:
        raise ValueError("no candidate features: vocabulary is empty")
    w = np.zeros((len(logs), len(vocab)))
    weights = np.asarray(vocab.idf)
    for i, log in enumerate(logs):
        for gram, tf in extract_ngrams(log, vocab.n).items():
            j = vocab._pos.get(gram)
            if j is not None:
                w[i, j] = tf * weights[j]
    return FeatureMatrix(vocab, w)
