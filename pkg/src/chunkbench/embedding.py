"""Embedding providers, unit-normalized vectors and a content-addressed cache."""

from __future__ import annotations

import hashlib
import logging
import os
import re
import struct
import time
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import httpx
import numpy as np

from ._cache import SingleFlightCache
from ._http import auth_headers, post_json
from .errors import ContractError, ProviderError
from .segmentation import TokenSequence, tokenize

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class Vector:
    """A unit-normalized float32 embedding tagged with the model that produced it."""

    values: np.ndarray
    model_id: str

    @classmethod
    def normalized(cls, values: Sequence[float] | np.ndarray, model_id: str) -> "Vector":
        raw = np.asarray(values, dtype=np.float64).reshape(-1)
        if raw.size == 0:
            raise ContractError("empty vector")
        if not np.all(np.isfinite(raw)):
            raise ContractError("vector has non-finite components")
        norm = float(np.linalg.norm(raw))
        if norm == 0.0:
            raise ContractError("cannot normalize a zero vector")
        arr = (raw / norm).astype(np.float32)
        arr.setflags(write=False)
        return cls(arr, model_id)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vector):
            return NotImplemented
        return self.model_id == other.model_id and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.model_id, self.values.tobytes()))


def _as_array(v: Vector | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(v, Vector):
        return v.values.astype(np.float64)
    return np.asarray(v, dtype=np.float64).reshape(-1)


def cosine_sim(a: Vector | Sequence[float] | np.ndarray, b: Vector | Sequence[float] | np.ndarray) -> float:
    x, y = _as_array(a), _as_array(b)
    if x.shape != y.shape:
        raise ContractError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    nx, ny = float(np.linalg.norm(x)), float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        raise ContractError("cosine similarity of a zero vector is undefined")
    sim = float(np.dot(x, y)) / (nx * ny)
    return max(-1.0, min(1.0, sim))


class EmbeddingProvider(ABC):
    """Maps texts to fixed-dimension vectors.

    ``embed_batch`` returns raw (un-normalized) rows; normalization, caching
    and dimension checks happen in :func:`embed_texts`. Providers that can
    emit one contextual vector per token set ``supports_token_level`` and
    implement :meth:`embed_tokens`.
    """

    model_id: str
    dim: int
    supports_token_level: bool = False

    def __init__(self, *, query_prefix: str = "", document_prefix: str = "") -> None:
        self.prefixes = {"query": query_prefix, "document": document_prefix}

    @abstractmethod
    def embed_batch(self, texts: list[str]) -> np.ndarray: ...

    def embed_tokens(self, text: str) -> tuple[TokenSequence, np.ndarray]:
        raise NotImplementedError(f"{self.model_id} does not expose token-level embeddings")


def _trigram_counts(text: str, dim: int) -> np.ndarray:
    padded = f" {text.lower()} "
    out = np.zeros(dim, dtype=np.float64)
    for i in range(len(padded) - 2):
        out[zlib.crc32(padded[i : i + 3].encode("utf-8")) % dim] += 1.0
    return out


def mock_embed(text: str, dim: int = 64, model_id: str | None = None) -> Vector:
    """Deterministic test embedding: hashed character 3-gram counts, L2-normalized.

    The text is lowercased and padded with one space on each side, so any
    non-empty string has at least one 3-gram.
    """
    if dim < 8:
        raise ContractError("mock embedding dimension must be at least 8")
    return Vector.normalized(_trigram_counts(text, dim), model_id or f"mock-3gram-{dim}")


class MockEmbedder(EmbeddingProvider):
    supports_token_level = True

    def __init__(self, dim: int = 64, model_id: str | None = None, **kwargs) -> None:
        super().__init__(**kwargs)
        if dim < 8:
            raise ContractError("mock embedding dimension must be at least 8")
        self.dim = dim
        self.model_id = model_id or f"mock-3gram-{dim}"
        self.calls = 0

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        self.calls += 1
        return np.stack([_trigram_counts(t, self.dim) for t in texts]) if texts else np.zeros((0, self.dim))

    def embed_tokens(self, text: str) -> tuple[TokenSequence, np.ndarray]:
        tokens = tokenize(text)
        if not len(tokens):
            return tokens, np.zeros((0, self.dim))
        rows = np.stack([mock_embed(t.text, self.dim).values for t in tokens.tokens]).astype(np.float64)
        return tokens, rows


class HttpEmbedder(EmbeddingProvider):
    """OpenAI-style ``/embeddings`` endpoint client."""

    def __init__(
        self,
        model: str,
        *,
        base_url: str | None = None,
        api_key: str | None = None,
        dim: int | None = None,
        batch_size: int = 32,
        attempts: int = 3,
        backoff: float = 0.25,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
        timeout: float = 60.0,
        **kwargs,
    ) -> None:
        super().__init__(**kwargs)
        base_url = base_url or os.environ.get("EMBED_API_BASE")
        if not base_url:
            raise ProviderError("no embedding endpoint configured (set EMBED_API_BASE)")
        self.model_id = model
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get("EMBED_API_KEY")
        self.dim = dim or 0
        self.batch_size = batch_size
        self.attempts = attempts
        self.backoff = backoff
        self._sleep = sleep
        self._client = client or httpx.Client(timeout=timeout)

    def embed_batch(self, texts: list[str], *, batch_index: int | None = None) -> np.ndarray:
        body = post_json(
            self._client,
            f"{self.base_url}/embeddings",
            {"model": self.model_id, "input": list(texts)},
            headers=auth_headers(self.api_key),
            attempts=self.attempts,
            backoff=self.backoff,
            sleep=self._sleep,
            batch_index=batch_index,
        )
        try:
            data = sorted(body["data"], key=lambda item: item["index"])
            rows = np.asarray([item["embedding"] for item in data], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(f"malformed embeddings response: {exc}", batch_index=batch_index) from exc
        if rows.ndim != 2 or rows.shape[0] != len(texts):
            raise ContractError(f"expected {len(texts)} embeddings, got shape {rows.shape}")
        if not self.dim:
            self.dim = int(rows.shape[1])
        return rows


_SAFE_RE = re.compile(r"[^A-Za-z0-9._-]+")


def _text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class EmbeddingCache(SingleFlightCache[tuple[str, str], Vector]):
    """Vectors keyed by ``(model_id, sha256(text))``, optionally mirrored to disk.

    On disk each entry is one file: little-endian ``uint32`` dimension
    followed by that many ``float32`` values.
    """

    def __init__(self, directory: str | Path | None = None) -> None:
        super().__init__()
        self.directory = Path(directory) if directory is not None else None

    def _path(self, key: tuple[str, str]) -> Path:
        assert self.directory is not None
        return self.directory / _SAFE_RE.sub("_", key[0]) / f"{key[1]}.bin"

    def _load(self, key):
        if self.directory is None:
            return None
        path = self._path(key)
        if not path.exists():
            return None
        raw = path.read_bytes()
        (dim,) = struct.unpack_from("<I", raw, 0)
        values = np.frombuffer(raw, dtype="<f4", count=dim, offset=4).astype(np.float32)
        values.setflags(write=False)
        return Vector(values, key[0])

    def _store(self, key, value: Vector) -> None:
        if self.directory is None:
            return
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp{os.getpid()}")
        tmp.write_bytes(struct.pack("<I", value.dim) + value.values.astype("<f4").tobytes())
        os.replace(tmp, path)


def embed_texts(
    provider: EmbeddingProvider,
    texts: Sequence[str],
    *,
    cache: EmbeddingCache | None = None,
    role: str = "document",
    batch_size: int | None = None,
) -> list[Vector]:
    """Embed ``texts`` in order, one unit-normalized vector per text.

    Identical texts are embedded once; with a cache, texts already known (or
    being embedded by another thread) are not sent to the provider again.
    """
    for t in texts:
        if not isinstance(t, str) or not t:
            raise ContractError("texts must be non-empty strings")
    prefix = provider.prefixes.get(role, "")
    full = [prefix + t for t in texts]
    keys = [(provider.model_id, _text_hash(t)) for t in full]
    store = cache if cache is not None else EmbeddingCache()
    found, waiting, mine = store.claim(keys)
    key_text = dict(zip(keys, full))
    size = batch_size or getattr(provider, "batch_size", 64)
    for b, start in enumerate(range(0, len(mine), size)):
        batch_keys = mine[start : start + size]
        try:
            if isinstance(provider, HttpEmbedder):
                rows = provider.embed_batch([key_text[k] for k in batch_keys], batch_index=b)
            else:
                rows = provider.embed_batch([key_text[k] for k in batch_keys])
            rows = np.asarray(rows)
            if rows.shape != (len(batch_keys), provider.dim):
                raise ContractError(
                    f"{provider.model_id}: expected shape ({len(batch_keys)}, {provider.dim}), got {rows.shape}"
                )
            for key, row in zip(batch_keys, rows):
                vec = Vector.normalized(row, provider.model_id)
                store.resolve(key, vec)
                found[key] = vec
        except BaseException as exc:
            for key in mine[start:]:
                store.fail(key, exc)
            if isinstance(exc, ProviderError) and exc.batch_index is None:
                raise ProviderError(str(exc), batch_index=b) from exc
            raise
    for key, future in waiting.items():
        found[key] = future.result()
    out = [found[k] for k in keys]
    for vec in out:
        if vec.dim != provider.dim:
            raise ContractError(f"{provider.model_id}: cached vector has dim {vec.dim}, provider declares {provider.dim}")
    return out


def embed_one(provider: EmbeddingProvider, text: str, **kwargs) -> Vector:
    return embed_texts(provider, [text], **kwargs)[0]
