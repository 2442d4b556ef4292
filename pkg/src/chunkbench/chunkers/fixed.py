"""Chunkers driven by token counts, character counts and document structure."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ..errors import ConfigError
from ..segmentation import TokenSequence, UnitList, tokenize
from .base import Chunk, check_overlap, make_chunks, window_spans

RECURSIVE_SEPARATORS: tuple[str, ...] = ("\n\n", "\n", ". ", " ")

DENSITY_PROBE_TOKENS = 200
DENSITY_REFERENCE = 0.5


def window_chunk(
    tokens: TokenSequence, window: int, stride: int, *, doc_id: str = "doc", strategy: str = "FC"
) -> list[Chunk]:
    """Token windows of ``window`` tokens every ``stride`` tokens (FC, OFC, SWC)."""
    spans = window_spans(len(tokens), window, stride)
    return make_chunks(
        tokens.source, [tokens.char_span(s, e) for s, e in spans], doc_id=doc_id, strategy=strategy, tokens=tokens
    )


def char_chunk(text: str, size: int, overlap: int, *, doc_id: str = "doc", strategy: str = "FCC") -> list[Chunk]:
    check_overlap(size, overlap)
    return make_chunks(text, window_spans(len(text), size, size - overlap), doc_id=doc_id, strategy=strategy)


def group_chunk(
    units: UnitList,
    group: int,
    overlap: int,
    *,
    doc_id: str = "doc",
    strategy: str = "SGC",
    tokens: TokenSequence | None = None,
) -> list[Chunk]:
    """Groups of ``group`` consecutive sentences or paragraphs sharing ``overlap`` units."""
    check_overlap(group, overlap, "group")
    spans = [(units[s].start, units[e - 1].end) for s, e in window_spans(len(units), group, group - overlap)]
    return make_chunks(units.source, spans, doc_id=doc_id, strategy=strategy, tokens=tokens)


@dataclass(frozen=True)
class _Piece:
    start: int
    end: int
    size: int


def _split_on(source: str, start: int, end: int, sep: str) -> list[tuple[int, int]]:
    ranges = []
    pos = start
    while True:
        hit = source.find(sep, pos, end)
        if hit < 0:
            break
        ranges.append((pos, hit + len(sep)))
        pos = hit + len(sep)
    ranges.append((pos, end))
    return ranges


def _trim(source: str, start: int, end: int) -> tuple[int, int] | None:
    while start < end and source[start].isspace():
        start += 1
    while end > start and source[end - 1].isspace():
        end -= 1
    return (start, end) if end > start else None


class _RecursiveSplitter:
    def __init__(self, tokens: TokenSequence, max_size: int, overlap: int, separators: Sequence[str]) -> None:
        self.tokens = tokens
        self.source = tokens.source
        self.max_size = max_size
        self.overlap = overlap
        self.separators = tuple(separators)

    def piece(self, start: int, end: int) -> _Piece:
        return _Piece(start, end, self.tokens.count_between(start, end))

    def fallback(self, start: int, end: int) -> list[tuple[int, int]]:
        lo, hi = self.tokens.token_span(start, end)
        stride = self.max_size - self.overlap
        return [self.tokens.char_span(lo + s, lo + e) for s, e in window_spans(hi - lo, self.max_size, stride)]

    def merge(self, pieces: list[_Piece]) -> list[tuple[int, int]]:
        out = []
        current: list[_Piece] = []
        total = 0
        for p in pieces:
            if current and total + p.size > self.max_size:
                out.append((current[0].start, current[-1].end))
                while current and (total > self.overlap or total + p.size > self.max_size):
                    total -= current.pop(0).size
            current.append(p)
            total += p.size
        if current:
            out.append((current[0].start, current[-1].end))
        return out

    def split(self, start: int, end: int, level: int = 0) -> list[tuple[int, int]]:
        if self.tokens.count_between(start, end) <= self.max_size:
            return [(start, end)]
        for depth in range(level, len(self.separators)):
            ranges = [_trim(self.source, s, e) for s, e in _split_on(self.source, start, end, self.separators[depth])]
            pieces = [self.piece(*r) for r in ranges if r is not None]
            pieces = [p for p in pieces if p.size > 0]
            if len(pieces) < 2:
                continue
            out: list[tuple[int, int]] = []
            fitting: list[_Piece] = []
            for p in pieces:
                if p.size <= self.max_size:
                    fitting.append(p)
                    continue
                out.extend(self.merge(fitting))
                fitting = []
                out.extend(self.split(p.start, p.end, depth + 1))
            out.extend(self.merge(fitting))
            return out
        return self.fallback(start, end)


def recursive_chunk(
    text: str,
    max_size: int,
    overlap: int,
    separators: Sequence[str] = RECURSIVE_SEPARATORS,
    *,
    doc_id: str = "doc",
    strategy: str = "RC",
    tokens: TokenSequence | None = None,
) -> list[Chunk]:
    """Split on the coarsest separator that helps until every piece has at most ``max_size`` tokens.

    Neighbouring pieces are merged back up to ``max_size`` with up to
    ``overlap`` tokens carried between merged chunks. When no separator
    splits an oversized segment, it is cut into token windows of
    ``max_size`` with stride ``max_size - overlap``.
    """
    check_overlap(max_size, overlap, "max_size")
    if not separators:
        raise ConfigError("recursive_chunk needs at least one separator")
    tokens = tokens if tokens is not None else tokenize(text)
    span = _trim(text, 0, len(text))
    if span is None:
        return []
    spans = _RecursiveSplitter(tokens, max_size, overlap, separators).split(*span)
    return make_chunks(text, spans, doc_id=doc_id, strategy=strategy, tokens=tokens)


def parent_child_chunk(
    tokens: TokenSequence, parent_size: int, child_size: int, *, doc_id: str = "doc", strategy: str = "PCC"
) -> list[Chunk]:
    """Children of consecutive parent windows; only children are returned, each pointing at its parent."""
    if not parent_size > child_size >= 1:
        raise ConfigError(f"need parent_size > child_size >= 1, got {parent_size}/{child_size}")
    spans, parents = [], []
    for j, (ps, pe) in enumerate(window_spans(len(tokens), parent_size, parent_size)):
        for cs, ce in window_spans(pe - ps, child_size, child_size):
            spans.append(tokens.char_span(ps + cs, ps + ce))
            parents.append(f"{doc_id}#{strategy}#P{j:05d}")
    return make_chunks(tokens.source, spans, doc_id=doc_id, strategy=strategy, tokens=tokens, parent_ids=parents)


def sentence_boundaries(tokens: TokenSequence, sentences: UnitList) -> list[int]:
    """Token indices at which a sentence ends (exclusive end of each sentence)."""
    return sorted({tokens.index_at(s.end) for s in sentences})


def dynamic_size_chunk(
    tokens: TokenSequence,
    sentences: UnitList,
    k_min: int,
    k_max: int,
    *,
    doc_id: str = "doc",
    strategy: str = "DFC",
) -> list[Chunk]:
    """Variable-size chunks that snap to sentence ends.

    From the cursor, a chunk closes at the last sentence end whose length
    from the cursor lies in ``[k_min, k_max]``. Without such a boundary the
    chunk is cut at exactly ``k_max`` tokens. Once at most ``k_max`` tokens
    remain they form the final chunk, which may be shorter than ``k_min``.
    """
    if not 1 <= k_min <= k_max:
        raise ConfigError(f"need 1 <= k_min <= k_max, got {k_min}/{k_max}")
    n = len(tokens)
    ends = sentence_boundaries(tokens, sentences)
    spans = []
    cursor = 0
    while cursor < n:
        if n - cursor <= k_max:
            end = n
        else:
            fits = [b for b in ends if cursor + k_min <= b <= cursor + k_max]
            end = fits[-1] if fits else cursor + k_max
        spans.append(tokens.char_span(cursor, end))
        cursor = end
    return make_chunks(tokens.source, spans, doc_id=doc_id, strategy=strategy, tokens=tokens)


def lexical_density(words: Sequence[str]) -> float:
    """Distinct lowercased tokens over total tokens."""
    if not words:
        raise ValueError("lexical density of an empty window is undefined")
    return len({w.lower() for w in words}) / len(words)


def density_chunk_length(density: float, base_size: int, k_min: int, k_max: int, reference: float = DENSITY_REFERENCE) -> int:
    return max(k_min, min(k_max, math.floor(base_size * reference / density + 0.5)))


def density_adaptive_chunk(
    tokens: TokenSequence,
    base_size: int,
    k_min: int = 50,
    k_max: int | None = None,
    *,
    probe: int = DENSITY_PROBE_TOKENS,
    reference: float = DENSITY_REFERENCE,
    doc_id: str = "doc",
    strategy: str = "CDAC",
) -> list[Chunk]:
    """Chunk length inversely proportional to the lexical density just ahead of the cursor."""
    if base_size < 1:
        raise ConfigError(f"base_size must be >= 1, got {base_size}")
    k_max = 2 * base_size if k_max is None else k_max
    if not 1 <= k_min <= k_max:
        raise ConfigError(f"need 1 <= k_min <= k_max, got {k_min}/{k_max}")
    n = len(tokens)
    spans = []
    cursor = 0
    while cursor < n:
        window = [t.text for t in tokens.tokens[cursor : cursor + min(probe, n - cursor)]]
        length = density_chunk_length(lexical_density(window), base_size, k_min, k_max, reference)
        end = min(n, cursor + length)
        spans.append(tokens.char_span(cursor, end))
        cursor = end
    return make_chunks(tokens.source, spans, doc_id=doc_id, strategy=strategy, tokens=tokens)
