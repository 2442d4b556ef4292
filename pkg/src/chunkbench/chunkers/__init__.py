"""The 36 chunking strategies and their shared building blocks."""

from .base import Chunk, chunk_id, make_chunks, window_spans
from .registry import (
    FAMILIES,
    STRATEGY_NAMES,
    Services,
    StrategyConfig,
    build_registry,
    chunk_document,
    chunk_document_with_vectors,
    registry_map,
)

__all__ = [
    "Chunk",
    "FAMILIES",
    "STRATEGY_NAMES",
    "Services",
    "StrategyConfig",
    "build_registry",
    "chunk_document",
    "chunk_document_with_vectors",
    "chunk_id",
    "make_chunks",
    "registry_map",
    "window_spans",
]
