"""Chunkers that ask a chat model where topic boundaries fall."""

from __future__ import annotations

import hashlib
import json
import logging
import math

from ..embedding import cosine_sim, mock_embed
from ..errors import ConfigError
from ..llm import ChatProvider, extract_json_object
from .._cache import SingleFlightCache
from ..segmentation import TokenSequence, UnitList
from .base import Chunk
from .hybrid import normalize_chunks
from .semantic import chunks_from_boundaries

logger = logging.getLogger(__name__)

BOUNDARY_PROMPT = """You are segmenting a document into self-contained retrieval chunks.
Decide whether a chunk boundary belongs between the two consecutive passages below.

Passage A:
{left}

Passage B:
{right}

Respond with JSON only:
{"p": <probability from 0 to 1 that a new chunk should start at Passage B>}"""

MALFORMED_RETRIES = 2


def render_boundary_prompt(left: str, right: str) -> str:
    return BOUNDARY_PROMPT.replace("{left}", left, 1).replace("{right}", right, 1)


class BoundaryCache(SingleFlightCache[str, float]):
    """Boundary probabilities keyed by a hash of model name and prompt."""

    @staticmethod
    def key(model: str, prompt: str) -> str:
        return hashlib.sha256(f"{model}\0{prompt}".encode("utf-8")).hexdigest()


def _parse_probability(reply: str) -> float:
    value = extract_json_object(reply)["p"]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"p is not a number: {value!r}")
    value = float(value)
    if not (math.isfinite(value) and 0.0 <= value <= 1.0):
        raise ValueError(f"p out of range: {value}")
    return value


def boundary_probability(llm: ChatProvider, left: str, right: str, cache: BoundaryCache | None = None) -> float:
    """Model-estimated probability of a boundary between two passages.

    Unparseable replies are retried twice, then treated as ``p = 0``.
    """
    prompt = render_boundary_prompt(left, right)
    key = BoundaryCache.key(llm.model, prompt)
    if cache is not None:
        found, waiting, mine = cache.claim([key])
        if key in found:
            return found[key]
        if key in waiting:
            return waiting[key].result()
    p = 0.0
    try:
        for attempt in range(MALFORMED_RETRIES + 1):
            reply = llm.complete(prompt)
            try:
                p = _parse_probability(reply)
                break
            except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
                logger.warning("boundary reply unparseable (attempt %d): %s", attempt + 1, exc)
        else:
            logger.warning("boundary probability defaulted to 0 after %d attempts", MALFORMED_RETRIES + 1)
    except BaseException as exc:
        if cache is not None:
            cache.fail(key, exc)
        raise
    if cache is not None:
        cache.resolve(key, p)
    return p


def llm_boundaries(sentences: UnitList, llm: ChatProvider, tau: float, cache: BoundaryCache | None = None) -> list[int]:
    texts = sentences.texts
    return [i for i in range(len(texts) - 1) if boundary_probability(llm, texts[i], texts[i + 1], cache) > tau]


def _check_tau(tau: float) -> None:
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"tau must be in (0, 1), got {tau}")


def llm_boundary_chunk(
    sentences: UnitList,
    llm: ChatProvider,
    tau: float = 0.5,
    *,
    cache: BoundaryCache | None = None,
    doc_id: str = "doc",
    strategy: str = "LBDC",
    tokens: TokenSequence | None = None,
) -> list[Chunk]:
    _check_tau(tau)
    if not len(sentences):
        return []
    cuts = llm_boundaries(sentences, llm, tau, cache)
    return chunks_from_boundaries(sentences, cuts, doc_id=doc_id, strategy=strategy, tokens=tokens)


def llm_segment_then_chunk(
    sentences: UnitList,
    llm: ChatProvider,
    tau: float = 0.5,
    max_tokens: int = 200,
    overlap: int = 20,
    *,
    cache: BoundaryCache | None = None,
    doc_id: str = "doc",
    strategy: str = "LSTC",
    tokens: TokenSequence | None = None,
) -> list[Chunk]:
    segments = llm_boundary_chunk(sentences, llm, tau, cache=cache, doc_id=doc_id, strategy=strategy, tokens=tokens)
    return normalize_chunks(
        segments, max_tokens, overlap, source=sentences.source, doc_id=doc_id, strategy=strategy, tokens=tokens
    )


class MockBoundaryChat(ChatProvider):
    """Deterministic stand-in for a boundary model.

    Reads the two passages back out of the prompt and answers
    ``p = 1 - cosine`` of their mock embeddings.
    """

    def __init__(self, dim: int = 64, model: str = "mock-boundary") -> None:
        self.model = model
        self.dim = dim
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        head, _, rest = prompt.partition("Passage A:\n")
        left, _, rest = rest.partition("\n\nPassage B:\n")
        right, _, _ = rest.partition("\n\nRespond with JSON only:")
        sim = cosine_sim(mock_embed(left, self.dim), mock_embed(right, self.dim))
        return json.dumps({"p": round(max(0.0, 1.0 - sim), 6)})
