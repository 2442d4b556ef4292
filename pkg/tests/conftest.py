from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from chunkbench.corpus import Document
from chunkbench.embedding import EmbeddingProvider
from chunkbench.segmentation import split_sentences

DATA = Path(__file__).parent / "data"


class TableEmbedder(EmbeddingProvider):
    """Returns a fixed vector per text, so tests control every similarity."""

    def __init__(self, table: dict[str, np.ndarray], model_id: str = "table") -> None:
        super().__init__()
        self.table = table
        self.model_id = model_id
        self.dim = len(next(iter(table.values())))

    def embed_batch(self, texts):
        return np.stack([self.table[t] for t in texts])


def sentences_with_sims(sims: list[float], dim: int = 8):
    """Sentences plus an embedder whose adjacent cosine similarities equal ``sims``.

    Vectors sit on a circle in the first two coordinates; each step turns by
    ``acos(sim)``, so consecutive cosines are exact.
    """
    angles = [0.0]
    for s in sims:
        angles.append(angles[-1] + math.acos(s))
    texts = [f"Sentence number {i} is here." for i in range(len(angles))]
    table = {}
    for t, a in zip(texts, angles):
        v = np.zeros(dim)
        v[0], v[1] = math.cos(a), math.sin(a)
        table[t] = v
    return split_sentences(" ".join(texts)), TableEmbedder(table)


def words(n: int, prefix: str = "w") -> str:
    return " ".join(f"{prefix}{i}" for i in range(n))


def synthetic_corpus() -> list[Document]:
    """Three documents: short, medium with paragraphs, and long (> 2000 tokens)."""
    rng = np.random.default_rng(7)
    vocab = (
        "river mountain protein enzyme market stock bond yield court judge statute contract "
        "patient therapy dosage trial orbit planet telescope signal archive museum poetry novel "
        "harvest soil rainfall drought circuit voltage sensor network"
    ).split()

    def sentence(lo: int, hi: int) -> str:
        n = int(rng.integers(lo, hi))
        body = " ".join(vocab[int(i)] for i in rng.integers(0, len(vocab), n))
        return body[0].upper() + body[1:] + "."

    short = Document("syn-short", "synthetic", "A tiny document. It has two sentences.")
    paragraphs = [" ".join(sentence(4, 18) for _ in range(int(rng.integers(2, 6)))) for _ in range(8)]
    medium = Document("syn-medium", "synthetic", "\n\n".join(paragraphs))
    long_paragraphs = [" ".join(sentence(5, 30) for _ in range(int(rng.integers(3, 9)))) for _ in range(60)]
    long_paragraphs.insert(10, " ".join(vocab[int(i)] for i in rng.integers(0, len(vocab), 260)))
    long = Document("syn-long", "synthetic", "\n\n".join(long_paragraphs))
    return [short, medium, long]


@pytest.fixture
def toy_docs() -> Path:
    return DATA / "toy_docs.jsonl"


@pytest.fixture
def toy_queries() -> Path:
    return DATA / "toy_queries.jsonl"
