"""Exact in-memory cosine index, one per (model, domain, strategy)."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import Vector
from .errors import ContractError, ParseError

MAGIC = b"CBIX1"
HEADER = struct.Struct("<5sIQ")
HEADER_BYTES = HEADER.size  # 17
ID_LENGTH = struct.Struct("<I")


@dataclass(frozen=True, order=True)
class IndexKey:
    model_id: str
    domain: str
    strategy_id: str

    def __post_init__(self) -> None:
        if not (self.model_id and self.domain and self.strategy_id):
            raise ContractError(f"index key components must be non-empty: {self}")


@dataclass(frozen=True)
class ScoredHit:
    chunk_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class IndexStats:
    count: int
    dim: int
    size_bytes: int


class VectorIndex:
    """Exhaustive dot-product search over unit vectors.

    Build it with :meth:`upsert`, then :meth:`seal` it before sharing it
    between reader threads. Queries never mutate state.
    """

    def __init__(self, dim: int | None = None) -> None:
        self.dim = dim
        self._ids: list[str] = []
        self._rows: list[np.ndarray] = []
        self._position: dict[str, int] = {}
        self._matrix: np.ndarray | None = None
        self._order: np.ndarray | None = None
        self.sealed = False

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def _check_dim(self, dim: int) -> None:
        if self.dim is None:
            self.dim = dim
        elif dim != self.dim:
            raise ContractError(f"vector dim {dim} does not match index dim {self.dim}")

    def upsert(self, chunk_id: str, vector: Vector | np.ndarray) -> None:
        if self.sealed:
            raise ContractError("index is sealed")
        values = vector.values if isinstance(vector, Vector) else Vector.normalized(vector, "raw").values
        self._check_dim(len(values))
        self._matrix = None
        if chunk_id in self._position:
            self._rows[self._position[chunk_id]] = values
            return
        self._position[chunk_id] = len(self._ids)
        self._ids.append(chunk_id)
        self._rows.append(values)

    def seal(self) -> "VectorIndex":
        self._build()
        self.sealed = True
        return self

    def _build(self) -> np.ndarray:
        if self._matrix is None:
            dim = self.dim or 0
            self._matrix = np.vstack(self._rows).astype(np.float32) if self._rows else np.zeros((0, dim), np.float32)
            # rank of each id in ascending string order, used as the tie-break key
            self._order = np.argsort(np.argsort(np.array(self._ids, dtype=object), kind="stable"), kind="stable")
        return self._matrix

    def scores(self, query: Vector | np.ndarray) -> np.ndarray:
        values = query.values if isinstance(query, Vector) else np.asarray(query, dtype=np.float32)
        self._check_query(len(values))
        q = Vector.normalized(values, "query").values.astype(np.float64)
        return self._build().astype(np.float64) @ q

    def _check_query(self, dim: int) -> None:
        if self.dim is not None and dim != self.dim:
            raise ContractError(f"query dim {dim} does not match index dim {self.dim}")

    def top_k(self, query: Vector | np.ndarray, k: int = 5) -> list[ScoredHit]:
        """The ``k`` most similar ids; equal scores are ordered by ascending chunk id."""
        if k < 1:
            raise ContractError(f"k must be >= 1, got {k}")
        if not self._ids:
            return []
        sims = self.scores(query)
        order = np.lexsort((self._order, -sims))[:k]
        return [ScoredHit(self._ids[i], float(sims[i]), rank) for rank, i in enumerate(order, start=1)]

    def stats(self) -> IndexStats:
        dim = self.dim or 0
        id_bytes = sum(ID_LENGTH.size + len(i.encode("utf-8")) for i in self._ids)
        return IndexStats(len(self._ids), dim, len(self._ids) * dim * 4 + id_bytes + HEADER_BYTES)

    def save(self, path: str | Path) -> int:
        """Write a little-endian snapshot; returns bytes written (equal to ``stats().size_bytes``)."""
        matrix = self._build().astype("<f4")
        parts = [HEADER.pack(MAGIC, self.dim or 0, len(self._ids))]
        for cid, row in zip(self._ids, matrix):
            raw = cid.encode("utf-8")
            parts += [ID_LENGTH.pack(len(raw)), raw, row.tobytes()]
        data = b"".join(parts)
        Path(path).write_bytes(data)
        return len(data)

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        data = Path(path).read_bytes()
        if len(data) < HEADER_BYTES:
            raise ParseError(f"{path}: truncated index header")
        magic, dim, count = HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ParseError(f"{path}: not an index snapshot")
        index = cls(dim or None)
        pos = HEADER_BYTES
        try:
            for _ in range(count):
                (n,) = ID_LENGTH.unpack_from(data, pos)
                pos += ID_LENGTH.size
                cid = data[pos : pos + n].decode("utf-8")
                pos += n
                row = np.frombuffer(data, dtype="<f4", count=dim, offset=pos).astype(np.float32)
                pos += 4 * dim
                row.setflags(write=False)
                index._position[cid] = len(index._ids)
                index._ids.append(cid)
                index._rows.append(row)
        except (struct.error, ValueError) as exc:
            raise ParseError(f"{path}: corrupt index snapshot: {exc}") from exc
        if pos != len(data):
            raise ParseError(f"{path}: {len(data) - pos} trailing bytes")
        return index.seal()
