"""Tokenization, sentence and paragraph splitting with character offsets.

All offsets index Unicode code points of the source string, so a span
``(start, end)`` always satisfies ``source[start:end] == unit.text``.
"""

from __future__ import annotations

import re
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

DEFAULT_ABBREVIATIONS: frozenset[str] = frozenset(
    """
    mr mrs ms dr prof sr jr st mt vs cf al approx dept est inc ltd co corp
    gen gov sen rep rev capt col lt sgt fig figs eq eqs vol vols pp ch sec
    jan feb mar apr jun jul aug sep sept oct nov dec
    """.split()
)

_TOKEN_RE = re.compile(r"\S+")
_PARAGRAPH_BREAK_RE = re.compile(r"\n[^\S\n]*\n\s*")
_TERMINAL_RE = re.compile(r"[.!?]+[\"'”’)\]]*")
_OPENERS = "\"'“‘([{"


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class TokenSequence:
    source: str
    tokens: tuple[Token, ...]
    _starts: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_starts", tuple(t.start for t in self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, i: int) -> Token:
        return self.tokens[i]

    def char_span(self, start: int, end: int) -> tuple[int, int]:
        """Character span covering tokens ``[start, end)``."""
        return self.tokens[start].start, self.tokens[end - 1].end

    def index_at(self, char_offset: int) -> int:
        """Index of the first token starting at or after ``char_offset``."""
        return bisect_left(self._starts, char_offset)

    def token_span(self, char_start: int, char_end: int) -> tuple[int, int]:
        """Token index range of tokens that start inside ``[char_start, char_end)``."""
        return self.index_at(char_start), self.index_at(char_end)

    def count_between(self, char_start: int, char_end: int) -> int:
        lo, hi = self.token_span(char_start, char_end)
        return hi - lo


class Tokenizer(Protocol):
    name: str

    def tokenize(self, text: str) -> TokenSequence: ...


class WhitespaceTokenizer:
    """Word-level tokenizer: a token is a maximal run of non-whitespace."""

    name = "whitespace-word"

    def tokenize(self, text: str) -> TokenSequence:
        return TokenSequence(text, tuple(Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)))


DEFAULT_TOKENIZER = WhitespaceTokenizer()


def tokenize(text: str, tokenizer: Tokenizer | None = None) -> TokenSequence:
    return (tokenizer or DEFAULT_TOKENIZER).tokenize(text)


@dataclass(frozen=True)
class Unit:
    text: str
    start: int
    end: int
    index: int


@dataclass(frozen=True)
class UnitList:
    """Ordered, non-overlapping sentences or paragraphs of ``source``."""

    source: str
    units: tuple[Unit, ...]

    def __len__(self) -> int:
        return len(self.units)

    def __getitem__(self, i: int) -> Unit:
        return self.units[i]

    def __iter__(self):
        return iter(self.units)

    @property
    def texts(self) -> list[str]:
        return [u.text for u in self.units]


SentenceList = UnitList
ParagraphList = UnitList


def _trimmed(source: str, start: int, end: int) -> tuple[int, int] | None:
    while start < end and source[start].isspace():
        start += 1
    while end > start and source[end - 1].isspace():
        end -= 1
    return (start, end) if end > start else None


def _build(source: str, ranges: Iterable[tuple[int, int]]) -> UnitList:
    units = []
    for start, end in ranges:
        span = _trimmed(source, start, end)
        if span is not None:
            units.append(Unit(source[span[0] : span[1]], span[0], span[1], len(units)))
    return UnitList(source, tuple(units))


def _paragraph_ranges(text: str) -> list[tuple[int, int]]:
    ranges = []
    pos = 0
    for m in _PARAGRAPH_BREAK_RE.finditer(text):
        ranges.append((pos, m.start()))
        pos = m.end()
    ranges.append((pos, len(text)))
    return ranges


def split_paragraphs(text: str) -> ParagraphList:
    """Paragraphs are separated by one or more blank (whitespace-only) lines."""
    return _build(text, _paragraph_ranges(text))


def load_abbreviations(path: str | Path) -> frozenset[str]:
    """One abbreviation per line, without the trailing period; ``#`` starts a comment."""
    entries = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip().rstrip(".").lower()
        if line:
            entries.add(line)
    return frozenset(entries)


def _is_guarded(text: str, punct_start: int, match: str, abbreviations: frozenset[str]) -> bool:
    if match.rstrip("\"'”’)]") != ".":
        return False
    ws = punct_start
    while ws > 0 and not text[ws - 1].isspace():
        ws -= 1
    word = text[ws:punct_start].lstrip(_OPENERS)
    if not word:
        return False
    # dotted forms such as "e.g." or "U.S."
    if "." in word:
        return True
    return word.lower() in abbreviations


def _starts_sentence(ch: str) -> bool:
    return ch.isupper() or ch.isdigit()


def _sentence_ranges(text: str, start: int, end: int, abbreviations: frozenset[str]) -> list[tuple[int, int]]:
    ranges = []
    pos = start
    for m in _TERMINAL_RE.finditer(text, start, end):
        cut = m.end()
        rest = cut
        while rest < end and text[rest].isspace():
            rest += 1
        if rest == end:
            continue  # end of paragraph closes the sentence anyway
        if rest == cut:
            continue  # no whitespace after the punctuation
        nxt = rest
        while nxt < end and text[nxt] in _OPENERS:
            nxt += 1
        if nxt >= end or not _starts_sentence(text[nxt]):
            continue
        if _is_guarded(text, m.start(), m.group(), abbreviations):
            continue
        ranges.append((pos, cut))
        pos = cut
    ranges.append((pos, end))
    return ranges


def split_sentences(text: str, abbreviations: frozenset[str] | None = None) -> SentenceList:
    """Rule-based sentence splitter.

    A boundary follows ``.``, ``!`` or ``?`` (plus closing quotes/brackets) when
    whitespace and then an uppercase letter or digit come next, unless the
    word before a single period is a known abbreviation or a dotted form.
    Paragraph breaks are always sentence boundaries, so sentences nest inside
    paragraphs.
    """
    abbreviations = DEFAULT_ABBREVIATIONS if abbreviations is None else abbreviations
    ranges: list[tuple[int, int]] = []
    for p_start, p_end in _paragraph_ranges(text):
        ranges.extend(_sentence_ranges(text, p_start, p_end, abbreviations))
    return _build(text, ranges)


def units_token_lengths(units: Sequence[Unit], tokens: TokenSequence) -> list[int]:
    return [tokens.count_between(u.start, u.end) for u in units]
