"""Graded relevance judgments (0, 1 or 2) for retrieved chunks."""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ._cache import SingleFlightCache
from .errors import ContractError, ProviderError
from .llm import ChatProvider, extract_json_object

logger = logging.getLogger(__name__)

JUDGE_PROMPT = """You are a strict information retrieval judge.

Reference Answer:
{answer}

Retrieved Chunk:
{chunk_text}

Assign a relevance score:
0 = Not relevant
1 = Partially relevant
2 = Fully relevant

Respond with JSON only:
{
  "score": 0 | 1 | 2,
  "reason": "short explanation"
}"""

MOCK_JUDGE_MODEL = "mock-coverage"
FULL_COVERAGE = 0.7
PARTIAL_COVERAGE = 0.3
MAX_RETRIES = 2
DEFAULT_CONCURRENCY = 4

_PLACEHOLDER = re.compile(r"\{(answer|chunk_text)\}")
_WORD = re.compile(r"\w+")


@dataclass(frozen=True)
class Judgment:
    query_id: str
    chunk_id: str
    gain: int
    reason: str
    judge_model: str
    degraded: bool = False

    def __post_init__(self) -> None:
        if self.gain not in (0, 1, 2):
            raise ContractError(f"gain must be 0, 1 or 2, got {self.gain!r}")

    def to_json(self) -> dict:
        return asdict(self)


def render_prompt(answer: str, chunk_text: str) -> str:
    """The judge prompt with both placeholders filled in a single pass.

    Substitution is single-pass so braces inside the answer or chunk are
    never re-interpreted. There is deliberately no query parameter.
    """
    if not answer or not chunk_text:
        raise ContractError("answer and chunk text must be non-empty")
    values = {"answer": answer, "chunk_text": chunk_text}
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], JUDGE_PROMPT)


def parse_verdict(reply: str) -> tuple[int, str]:
    """Extract ``(score, reason)`` from a judge reply, raising ``ValueError`` on anything off-protocol."""
    obj = extract_json_object(reply)
    score = obj.get("score")
    if isinstance(score, bool) or not isinstance(score, int) or score not in (0, 1, 2):
        raise ValueError(f"score out of range: {score!r}")
    reason = obj.get("reason", "")
    if not isinstance(reason, str):
        raise ValueError("reason must be a string")
    return score, reason


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def qualifying_tokens(text: str) -> set[str]:
    return {w for w in _WORD.findall(text.lower()) if len(w) >= 3}


def coverage(answer: str, chunk_text: str) -> float | None:
    """Share of the answer's qualifying tokens present in the chunk, or ``None`` if it has none."""
    wanted = qualifying_tokens(answer)
    if not wanted:
        return None
    return len(wanted & qualifying_tokens(chunk_text)) / len(wanted)


def mock_verdict(
    answer: str, chunk_text: str, *, full: float = FULL_COVERAGE, partial: float = PARTIAL_COVERAGE
) -> tuple[int, str, bool]:
    cov = coverage(answer, chunk_text)
    if cov is None:
        return 0, "answer has no qualifying tokens", True
    gain = 2 if cov >= full else 1 if cov >= partial else 0
    return gain, f"coverage {cov:.3f}", False


def mock_judge(answer: str, chunk_text: str, *, query_id: str = "", chunk_id: str = "") -> Judgment:
    """Deterministic lexical-coverage stand-in for the LLM judge."""
    gain, reason, degraded = mock_verdict(answer, chunk_text)
    return Judgment(query_id, chunk_id, gain, reason, MOCK_JUDGE_MODEL, degraded)


@dataclass(frozen=True)
class Verdict:
    gain: int
    reason: str
    degraded: bool


class JudgmentCache(SingleFlightCache[tuple[str, str, str], Verdict]):
    """Verdicts keyed by (judge model, answer hash, chunk hash), optionally mirrored to JSON-lines."""

    def __init__(self, path: str | Path | None = None) -> None:
        super().__init__()
        self.path = Path(path) if path is not None else None
        self._file_lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                try:
                    r = json.loads(line)
                    self._values[(r["judge_model"], r["answer_sha256"], r["chunk_sha256"])] = Verdict(
                        int(r["gain"]), r["reason"], bool(r["degraded"])
                    )
                except (ValueError, KeyError):
                    logger.warning("skipping corrupt judgment cache line in %s", self.path)

    @staticmethod
    def key(model: str, answer: str, chunk_text: str) -> tuple[str, str, str]:
        return model, _digest(answer), _digest(chunk_text)

    def _store(self, key: tuple[str, str, str], value: Verdict) -> None:
        if self.path is None or value.degraded:
            return
        record = {
            "judge_model": key[0],
            "answer_sha256": key[1],
            "chunk_sha256": key[2],
            "gain": value.gain,
            "reason": value.reason,
            "degraded": value.degraded,
        }
        with self._file_lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")


class Judge:
    """Scores (answer, chunk) pairs with an LLM, or with the mock judge when no provider is given."""

    def __init__(
        self,
        provider: ChatProvider | None = None,
        *,
        cache: JudgmentCache | None = None,
        retries: int = MAX_RETRIES,
        concurrency: int = DEFAULT_CONCURRENCY,
    ) -> None:
        self.provider = provider
        self.cache = cache if cache is not None else JudgmentCache()
        self.retries = retries
        self.concurrency = max(1, concurrency)
        self.provider_calls = 0
        self._count_lock = threading.Lock()

    @property
    def model(self) -> str:
        return self.provider.model if self.provider is not None else MOCK_JUDGE_MODEL

    def _ask(self, answer: str, chunk_text: str) -> Verdict:
        if self.provider is None:
            return Verdict(*mock_verdict(answer, chunk_text))
        prompt = render_prompt(answer, chunk_text)
        problem = ""
        for attempt in range(self.retries + 1):
            with self._count_lock:
                self.provider_calls += 1
            reply = self.provider.complete(prompt)
            try:
                score, reason = parse_verdict(reply)
                return Verdict(score, reason, False)
            except ValueError as exc:
                problem = str(exc)
                logger.debug("judge reply rejected (attempt %d): %s", attempt + 1, problem)
        logger.warning("judge %s gave no valid verdict after %d attempts: %s", self.model, self.retries + 1, problem)
        return Verdict(0, f"fallback: {problem}", True)

    def verdict(self, answer: str, chunk_text: str) -> Verdict:
        key = JudgmentCache.key(self.model, answer, chunk_text)
        found, waiting, mine = self.cache.claim([key])
        if key in found:
            return found[key]
        if key in waiting:
            return waiting[key].result()
        try:
            value = self._ask(answer, chunk_text)
        except BaseException as exc:
            self.cache.fail(key, exc)
            raise
        self.cache.resolve(key, value)
        return value

    def judge(self, query_id: str, chunk_id: str, answer: str, chunk_text: str) -> Judgment:
        v = self.verdict(answer, chunk_text)
        return Judgment(query_id, chunk_id, v.gain, v.reason, self.model, v.degraded)

    def judge_many(self, items: Sequence[tuple[str, str, str, str]]) -> list[Judgment]:
        """Judge ``(query_id, chunk_id, answer, chunk_text)`` tuples with bounded concurrency, preserving order."""
        if self.provider is None or self.concurrency == 1 or len(items) <= 1:
            return [self.judge(*item) for item in items]
        with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
            return list(pool.map(lambda item: self.judge(*item), items))


def judge_chunk(
    provider: ChatProvider, answer: str, chunk_text: str, *, cache: JudgmentCache | None = None
) -> Judgment:
    return Judge(provider, cache=cache).judge("", "", answer, chunk_text)


def write_judgments(path: str | Path, judgments: Iterable[Judgment]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for j in judgments:
            fh.write(json.dumps(j.to_json()) + "\n")


def read_judgments(path: str | Path) -> list[Judgment]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(Judgment(**json.loads(line)))
    return out


__all__ = [
    "JUDGE_PROMPT",
    "Judge",
    "Judgment",
    "JudgmentCache",
    "ProviderError",
    "coverage",
    "judge_chunk",
    "mock_judge",
    "parse_verdict",
    "render_prompt",
]
