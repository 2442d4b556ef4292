"""Late chunking: embed the whole document once, then pool token vectors per chunk."""

from __future__ import annotations

import logging
from typing import Literal

import numpy as np

from ..corpus import Document
from ..embedding import EmbeddingCache, EmbeddingProvider, Vector, embed_texts
from ..errors import ConfigError
from ..segmentation import TokenSequence, split_paragraphs, split_sentences, tokenize
from .base import Chunk, make_chunks, window_spans

logger = logging.getLogger(__name__)

Granularity = Literal["sentence", "paragraph", "token_span"]
LEAD_TOKENS = 256


def late_units(
    doc: Document,
    granularity: Granularity,
    *,
    span: int = 128,
    step: int = 64,
    tokens: TokenSequence | None = None,
    abbreviations: frozenset[str] | None = None,
) -> list[tuple[int, int]]:
    if granularity == "sentence":
        return [(u.start, u.end) for u in split_sentences(doc.text, abbreviations)]
    if granularity == "paragraph":
        return [(u.start, u.end) for u in split_paragraphs(doc.text)]
    if granularity == "token_span":
        tokens = tokens if tokens is not None else tokenize(doc.text)
        return [tokens.char_span(s, e) for s, e in window_spans(len(tokens), span, step)]
    raise ConfigError(f"unknown late-chunking granularity {granularity!r}")


def late_chunk(
    doc: Document,
    embedder: EmbeddingProvider,
    granularity: Granularity,
    *,
    span: int = 128,
    step: int = 64,
    strategy: str = "LCTS",
    cache: EmbeddingCache | None = None,
    tokens: TokenSequence | None = None,
    abbreviations: frozenset[str] | None = None,
    metadata: dict | None = None,
) -> list[tuple[Chunk, Vector]]:
    """Chunks paired with vectors pooled from one whole-document embedding pass.

    Each chunk vector is the re-normalized mean of the contextual token
    vectors that start inside the chunk. Providers without token-level
    output fall back to embedding the document's first 256 tokens followed
    by the unit text; the fallback is recorded in ``metadata``.
    """
    tokens = tokens if tokens is not None else tokenize(doc.text)
    spans = late_units(doc, granularity, span=span, step=step, tokens=tokens, abbreviations=abbreviations)
    chunks = make_chunks(doc.text, spans, doc_id=doc.id, strategy=strategy, tokens=tokens)
    if not chunks:
        return []
    if embedder.supports_token_level:
        model_tokens, rows = embedder.embed_tokens(doc.text)
        rows = np.asarray(rows, dtype=np.float64)
        pairs = []
        for chunk in chunks:
            lo, hi = model_tokens.token_span(*chunk.char_span)
            if hi > lo:
                vec = Vector.normalized(rows[lo:hi].mean(axis=0), embedder.model_id)
            else:
                vec = embed_texts(embedder, [chunk.text], cache=cache)[0]
            pairs.append((chunk, vec))
        return pairs
    logger.info("%s has no token-level output; late chunking uses lead-context fallback", embedder.model_id)
    if metadata is not None:
        fallbacks = metadata.setdefault("late_chunking_fallback", [])
        if embedder.model_id not in fallbacks:
            fallbacks.append(embedder.model_id)
    lead = doc.text[: tokens.char_span(0, min(LEAD_TOKENS, len(tokens)))[1]]
    vectors = embed_texts(embedder, [f"{lead}\n\n{c.text}" for c in chunks], cache=cache)
    return list(zip(chunks, vectors))
