from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from ..errors import ConfigError
from ..segmentation import TokenSequence, tokenize


@dataclass(frozen=True)
class Chunk:
    """One retrieval unit: a contiguous span of its source document."""

    id: str
    doc_id: str
    strategy_id: str
    seq: int
    text: str
    char_span: tuple[int, int]
    token_span: tuple[int, int] | None = None
    parent_id: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "doc_id": self.doc_id,
            "strategy": self.strategy_id,
            "seq": self.seq,
            "text": self.text,
            "char_span": list(self.char_span),
            "token_span": list(self.token_span) if self.token_span is not None else None,
            "parent_id": self.parent_id,
        }

    @classmethod
    def from_json(cls, record: dict[str, Any]) -> "Chunk":
        token_span = record.get("token_span")
        return cls(
            id=record["id"],
            doc_id=record["doc_id"],
            strategy_id=record["strategy"],
            seq=int(record["seq"]),
            text=record["text"],
            char_span=tuple(record["char_span"]),
            token_span=tuple(token_span) if token_span is not None else None,
            parent_id=record.get("parent_id"),
        )


def chunk_id(doc_id: str, strategy: str, seq: int) -> str:
    return f"{doc_id}#{strategy}#{seq:05d}"


def window_spans(n: int, window: int, stride: int) -> list[tuple[int, int]]:
    """Index ranges ``[i*stride, i*stride + window)`` clipped to ``n``.

    Stops at the first window that reaches ``n``; a later window would lie
    entirely inside it.
    """
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    if not 1 <= stride <= window:
        raise ConfigError(f"stride must be in [1, window], got {stride} (window={window})")
    spans = []
    start = 0
    while start < n:
        end = min(start + window, n)
        spans.append((start, end))
        if end == n:
            break
        start += stride
    return spans


def check_overlap(size: int, overlap: int, what: str = "size") -> None:
    if size < 1:
        raise ConfigError(f"{what} must be >= 1, got {size}")
    if not 0 <= overlap < size:
        raise ConfigError(f"overlap must be in [0, {what}), got {overlap} ({what}={size})")


def make_chunks(
    source: str,
    spans: Iterable[tuple[int, int]],
    *,
    doc_id: str,
    strategy: str,
    tokens: TokenSequence | None = None,
    parent_ids: Sequence[str | None] | None = None,
) -> list[Chunk]:
    """Turn character spans into labelled chunks, dropping whitespace-only spans."""
    if tokens is None:
        tokens = tokenize(source)
    out: list[Chunk] = []
    for i, (start, end) in enumerate(spans):
        text = source[start:end]
        if not text.strip():
            continue
        seq = len(out)
        out.append(
            Chunk(
                id=chunk_id(doc_id, strategy, seq),
                doc_id=doc_id,
                strategy_id=strategy,
                seq=seq,
                text=text,
                char_span=(start, end),
                token_span=tokens.token_span(start, end),
                parent_id=parent_ids[i] if parent_ids is not None else None,
            )
        )
    return out


def relabel(chunks: Iterable[Chunk], *, source: str, doc_id: str, strategy: str, tokens: TokenSequence | None = None) -> list[Chunk]:
    """Re-number chunks in source order under a new strategy id, dropping duplicate spans."""
    spans = sorted({c.char_span for c in chunks})
    return make_chunks(source, spans, doc_id=doc_id, strategy=strategy, tokens=tokens)
