"""TF-IDF features over base questions, plus the shared cosine utility."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embeddings import word_tokens
from .errors import ValidationError

tokenize = word_tokens


@dataclass(frozen=True)
class TfidfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    corpus_size: int

    @property
    def dim(self) -> int:
        return len(self.vocabulary)


def fit_tfidf(corpus: Sequence[str]) -> TfidfModel:
    """Fit vocabulary and smoothed idf on a corpus of texts.

    Vocabulary is every token in the corpus, ordered lexicographically;
    ``idf(t) = ln((1 + N) / (1 + df(t))) + 1`` which keeps every weight
    strictly positive.
    """
    if len(corpus) == 0:
        raise ValidationError("cannot fit TF-IDF on an empty corpus")
    doc_freq: dict[str, int] = {}
    for text in corpus:
        for token in set(tokenize(text)):
            doc_freq[token] = doc_freq.get(token, 0) + 1
    vocabulary = {token: i for i, token in enumerate(sorted(doc_freq))}
    n = len(corpus)
    idf = np.empty(len(vocabulary))
    for token, col in vocabulary.items():
        idf[col] = math.log((1 + n) / (1 + doc_freq[token])) + 1.0
    return TfidfModel(vocabulary=vocabulary, idf=idf, corpus_size=n)


def transform_tfidf(model: TfidfModel, text: str) -> np.ndarray:
    """Raw term counts times idf, L2-normalized; out-of-vocabulary tokens
    are ignored and an all-zero vector stays all-zero."""
    vec = np.zeros(model.dim)
    vocabulary = model.vocabulary
    for token in tokenize(text):
        col = vocabulary.get(token)
        if col is not None:
            vec[col] += 1.0
    vec *= model.idf
    norm = float(np.linalg.norm(vec))
    if norm > 0:
        vec /= norm
    return vec


def cosine(u, v) -> float:
    """Cosine similarity; 0 when either vector has zero norm."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValidationError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))
