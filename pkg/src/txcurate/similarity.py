"""String similarity over description tokens, plus the IDF table."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .textnorm import normalize


class SimilarityMethod(str, Enum):
    JACCARD = "Jaccard"
    TFIDF_COSINE = "TfIdfCosine"
    COSINE = "Cosine"
    CITY_BLOCK = "CityBlock"
    EUCLIDEAN = "Euclidean"


@dataclass(frozen=True, slots=True)
class IdfTable:
    """Smoothed inverse document frequencies over a fixed corpus."""

    doc_count: int
    doc_frequency: Mapping[str, int]

    def weight(self, token: str) -> float:
        df = self.doc_frequency.get(token, 0)
        return math.log((1 + self.doc_count) / (1 + df)) + 1.0


def build_idf(corpus: Sequence) -> IdfTable:
    """Document frequencies from extracted items (one doc per item).

    A token counts once per document regardless of repeats. Queries for
    unseen tokens fall back to the zero-frequency weight.
    """
    if not corpus:
        raise ValueError("cannot build an IDF table from an empty corpus")
    df: Counter[str] = Counter()
    for item in corpus:
        df.update({t.text for t in item.tokens})
    return IdfTable(doc_count=len(corpus), doc_frequency=dict(df))


def tokens_of(text: str) -> list[str]:
    return normalize(text).split()


def similarity(
    a: str,
    b: str,
    method: SimilarityMethod,
    idf: IdfTable | None = None,
) -> float:
    """Similarity of two strings in [0, 1] under the chosen method."""
    return similarity_tokens(tokens_of(a), tokens_of(b), method, idf)


def similarity_tokens(
    tokens_a: Sequence[str],
    tokens_b: Sequence[str],
    method: SimilarityMethod,
    idf: IdfTable | None = None,
) -> float:
    if method is SimilarityMethod.JACCARD:
        return jaccard(tokens_a, tokens_b)
    counts_a = Counter(tokens_a)
    counts_b = Counter(tokens_b)
    if method is SimilarityMethod.COSINE:
        return _cosine(counts_a, counts_b)
    if method is SimilarityMethod.TFIDF_COSINE:
        if idf is None:
            raise ValueError("TfIdfCosine needs an IDF table")
        weighted_a = {t: c * idf.weight(t) for t, c in counts_a.items()}
        weighted_b = {t: c * idf.weight(t) for t, c in counts_b.items()}
        return _cosine(weighted_a, weighted_b)
    if method is SimilarityMethod.CITY_BLOCK:
        return 1.0 / (1.0 + city_block_distance(tokens_a, tokens_b))
    if method is SimilarityMethod.EUCLIDEAN:
        return 1.0 / (1.0 + euclidean_distance(tokens_a, tokens_b))
    raise ValueError(f"unknown similarity method {method!r}")


def jaccard(tokens_a: Iterable[str], tokens_b: Iterable[str]) -> float:
    set_a = set(tokens_a)
    set_b = set(tokens_b)
    if not set_a and not set_b:
        return 1.0
    union = len(set_a | set_b)
    return len(set_a & set_b) / union


def _cosine(
    vec_a: Mapping[str, float], vec_b: Mapping[str, float]
) -> float:
    norm_a = math.sqrt(sum(v * v for v in vec_a.values()))
    norm_b = math.sqrt(sum(v * v for v in vec_b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    dot = sum(v * vec_b.get(t, 0.0) for t, v in vec_a.items())
    return dot / (norm_a * norm_b)


def city_block_distance(
    tokens_a: Sequence[str], tokens_b: Sequence[str]
) -> float:
    """L1 distance between token-frequency vectors."""
    counts_a = Counter(tokens_a)
    counts_b = Counter(tokens_b)
    return float(
        sum(
            abs(counts_a.get(t, 0) - counts_b.get(t, 0))
            for t in set(counts_a) | set(counts_b)
        )
    )


def euclidean_distance(
    tokens_a: Sequence[str], tokens_b: Sequence[str]
) -> float:
    """L2 distance between token-frequency vectors."""
    counts_a = Counter(tokens_a)
    counts_b = Counter(tokens_b)
    return math.sqrt(
        sum(
            (counts_a.get(t, 0) - counts_b.get(t, 0)) ** 2
            for t in set(counts_a) | set(counts_b)
        )
    )
