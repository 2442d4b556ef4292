"""Token-length normalization applied after a primary chunker."""

from __future__ import annotations

from typing import Sequence

from ..segmentation import TokenSequence, tokenize
from .base import Chunk, check_overlap, relabel, window_spans


def normalize_chunks(
    chunks: Sequence[Chunk],
    max_tokens: int,
    overlap: int,
    *,
    source: str,
    doc_id: str,
    strategy: str,
    tokens: TokenSequence | None = None,
) -> list[Chunk]:
    """Re-split every chunk longer than ``max_tokens`` into windows with stride ``max_tokens - overlap``.

    Chunks within the limit pass through with their spans unchanged. The
    result is renumbered in source order under ``strategy``.
    """
    check_overlap(max_tokens, overlap, "max_tokens")
    pieces: list[Chunk] = []
    for chunk in chunks:
        local = tokenize(chunk.text)
        if len(local) <= max_tokens:
            pieces.append(chunk)
            continue
        offset = chunk.char_span[0]
        for s, e in window_spans(len(local), max_tokens, max_tokens - overlap):
            a, b = local.char_span(s, e)
            pieces.append(Chunk("", doc_id, strategy, 0, chunk.text[a:b], (offset + a, offset + b)))
    return relabel(pieces, source=source, doc_id=doc_id, strategy=strategy, tokens=tokens)
