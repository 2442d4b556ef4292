"""Embedding-driven chunkers: threshold, variance-adaptive and topic boundaries."""

from __future__ import annotations

from collections import deque
from typing import Iterable

import numpy as np

from ..embedding import EmbeddingCache, EmbeddingProvider, embed_texts
from ..errors import ConfigError
from ..segmentation import TokenSequence, UnitList
from .base import Chunk, make_chunks


def sentence_matrix(sentences: UnitList, embedder: EmbeddingProvider, cache: EmbeddingCache | None = None) -> np.ndarray:
    """Unit-normalized sentence embeddings as rows of a float64 matrix."""
    vectors = embed_texts(embedder, sentences.texts, cache=cache)
    return np.stack([v.values for v in vectors]).astype(np.float64)


def adjacent_similarities(matrix: np.ndarray) -> list[float]:
    """Cosine similarity of each row with the next one."""
    if len(matrix) < 2:
        return []
    norms = np.linalg.norm(matrix, axis=1)
    dots = np.einsum("ij,ij->i", matrix[:-1], matrix[1:])
    return [float(x) for x in dots / (norms[:-1] * norms[1:])]


def chunks_from_boundaries(
    units: UnitList,
    boundaries: Iterable[int],
    *,
    doc_id: str,
    strategy: str,
    tokens: TokenSequence | None = None,
) -> list[Chunk]:
    """Group units into runs; boundary ``i`` separates unit ``i`` from unit ``i + 1``."""
    if not len(units):
        return []
    cuts = sorted(set(boundaries))
    spans = []
    first = 0
    for i in cuts + [len(units) - 1]:
        spans.append((units[first].start, units[i].end))
        first = i + 1
    return make_chunks(units.source, spans, doc_id=doc_id, strategy=strategy, tokens=tokens)


def threshold_boundaries(sims: list[float], theta: float) -> list[int]:
    return [i for i, s in enumerate(sims) if s < theta]


def quantile_threshold(sims: list[float], q: float) -> float:
    return float(np.quantile(sims, q)) if sims else 0.0


def semantic_boundary_chunk(
    sentences: UnitList,
    embedder: EmbeddingProvider,
    theta: float | None = 0.6,
    *,
    quantile: float | None = None,
    cache: EmbeddingCache | None = None,
    doc_id: str = "doc",
    strategy: str = "SSTC",
    tokens: TokenSequence | None = None,
) -> list[Chunk]:
    """Cut between adjacent sentences whose cosine similarity falls below ``theta``.

    With ``quantile`` set instead, ``theta`` is that quantile of the
    document's own adjacent-similarity distribution.
    """
    if (theta is None) == (quantile is None):
        raise ConfigError("give exactly one of theta or quantile")
    if theta is not None and not 0.0 <= theta <= 1.0:
        raise ConfigError(f"theta must be in [0, 1], got {theta}")
    if not len(sentences):
        return []
    sims = adjacent_similarities(sentence_matrix(sentences, embedder, cache))
    if quantile is not None:
        theta = quantile_threshold(sims, quantile)
    return chunks_from_boundaries(
        sentences, threshold_boundaries(sims, theta), doc_id=doc_id, strategy=strategy, tokens=tokens
    )


def variance_boundaries(sims: list[float], delta: float, window: int = 5) -> list[int]:
    """Boundary where a similarity drops below the rolling mean of the previous ``window`` ones minus ``delta``."""
    history: deque[float] = deque(maxlen=window)
    cuts = []
    for i, s in enumerate(sims):
        if history and s < sum(history) / len(history) - delta:
            cuts.append(i)
        history.append(s)
    return cuts


def variance_adaptive_chunk(
    sentences: UnitList,
    embedder: EmbeddingProvider,
    delta: float,
    window: int = 5,
    *,
    cache: EmbeddingCache | None = None,
    doc_id: str = "doc",
    strategy: str = "SVAC",
    tokens: TokenSequence | None = None,
) -> list[Chunk]:
    if delta < 0:
        raise ConfigError(f"delta must be >= 0, got {delta}")
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    if not len(sentences):
        return []
    sims = adjacent_similarities(sentence_matrix(sentences, embedder, cache))
    return chunks_from_boundaries(
        sentences, variance_boundaries(sims, delta, window), doc_id=doc_id, strategy=strategy, tokens=tokens
    )


def topic_assignments(matrix: np.ndarray, dist_threshold: float) -> list[int]:
    """Sequential centroid clustering.

    A row joins the current cluster when its cosine distance to the cluster's
    normalized running-mean centroid is at most ``dist_threshold``; otherwise
    it opens a new cluster.
    """
    labels: list[int] = []
    total = None
    for row in matrix:
        if total is None:
            total = row.copy()
            labels.append(0)
            continue
        centroid = total / np.linalg.norm(total)
        distance = 1.0 - float(np.dot(row, centroid) / np.linalg.norm(row))
        if distance <= dist_threshold:
            total = total + row
            labels.append(labels[-1])
        else:
            total = row.copy()
            labels.append(labels[-1] + 1)
    return labels


def topic_chunk(
    sentences: UnitList,
    embedder: EmbeddingProvider,
    dist_threshold: float,
    *,
    cache: EmbeddingCache | None = None,
    doc_id: str = "doc",
    strategy: str = "TBC",
    tokens: TokenSequence | None = None,
) -> list[Chunk]:
    if not 0.0 <= dist_threshold <= 1.0:
        raise ConfigError(f"dist_threshold must be in [0, 1], got {dist_threshold}")
    if not len(sentences):
        return []
    labels = topic_assignments(sentence_matrix(sentences, embedder, cache), dist_threshold)
    cuts = [i for i in range(len(labels) - 1) if labels[i] != labels[i + 1]]
    return chunks_from_boundaries(sentences, cuts, doc_id=doc_id, strategy=strategy, tokens=tokens)
