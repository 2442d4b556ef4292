"""The 36 named chunking configurations and a uniform way to run them."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..corpus import Document
from ..embedding import EmbeddingCache, EmbeddingProvider, Vector
from ..errors import ConfigError
from ..llm import ChatProvider
from ..segmentation import DEFAULT_TOKENIZER, Tokenizer, split_paragraphs, split_sentences
from .base import Chunk
from .fixed import (
    RECURSIVE_SEPARATORS,
    char_chunk,
    density_adaptive_chunk,
    dynamic_size_chunk,
    group_chunk,
    parent_child_chunk,
    recursive_chunk,
    window_chunk,
)
from .hybrid import normalize_chunks
from .late import late_chunk
from .llm import BoundaryCache, llm_boundary_chunk, llm_segment_then_chunk
from .semantic import semantic_boundary_chunk, topic_chunk, variance_adaptive_chunk

FAMILIES = ("deterministic", "recursive", "semantic", "adaptive", "late", "llm", "hybrid")

RTF_SEPARATORS: tuple[str, ...] = ("\n\n", "\n", ". ")


@dataclass(frozen=True)
class StrategyConfig:
    name: str
    family: str
    kind: str
    label: str
    category: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "family": self.family,
            "kind": self.kind,
            "label": self.label,
            "category": self.category,
            "params": dict(self.params),
        }


# name, family, kind (mechanism), category, label, params
_TABLE: list[tuple[str, str, str, str, str, dict[str, Any]]] = [
    ("FCC", "deterministic", "char", "Deterministic / Rule-Based", "Fixed Character Chunking", {"size": 100, "overlap": 10}),
    ("FC", "deterministic", "token", "Deterministic / Rule-Based", "Fixed Token Chunking", {"size": 50, "overlap": 0}),
    ("OFC", "deterministic", "token", "Deterministic / Rule-Based", "Overlapping Token Chunking", {"size": 50, "overlap": 10}),
    ("SWC", "deterministic", "sliding", "Deterministic / Rule-Based", "Sliding Window Token Chunking", {"window": 50, "step": 25}),
    ("LAC", "deterministic", "length_aware", "Deterministic / Rule-Based", "Length Aware Chunking", {"target": 500, "tolerance": 100}),
    ("SBC", "deterministic", "sentence_group", "Deterministic / Rule-Based", "Sentence Based Chunking", {"sentences": 1, "overlap": 0}),
    ("SGC", "deterministic", "sentence_group", "Deterministic / Rule-Based", "Sentence Group Chunking", {"sentences": 3, "overlap": 1}),
    ("PBC", "deterministic", "paragraph_group", "Deterministic / Rule-Based", "Paragraph Based Chunking", {"paragraphs": 1, "overlap": 0}),
    ("PGC", "deterministic", "paragraph_group", "Deterministic / Rule-Based", "Paragraph Group Chunking", {"paragraphs": 2, "overlap": 1}),
    ("RC", "recursive", "recursive", "Recursive / Hierarchical", "Recursive Chunking", {"chunk_size": 500, "overlap": 50}),
    ("RTF", "recursive", "recursive_fallback", "Recursive / Hierarchical", "Recursive Token Fallback Chunking", {"token_size": 100, "overlap": 10}),
    ("PCC", "recursive", "parent_child", "Recursive / Hierarchical", "Parent Child Chunking", {"parent": 500, "child": 100}),
    ("SEBC", "semantic", "similarity_threshold", "Semantic / Topic-Aware", "Semantic Embedding Based Chunking", {"threshold": 0.5}),
    ("SSTC", "semantic", "similarity_threshold", "Semantic / Topic-Aware", "Semantic Similarity Threshold Chunking", {"threshold": 0.6}),
    ("TBC", "semantic", "topic", "Semantic / Topic-Aware", "Topic Based Chunking", {"distance_threshold": 0.4}),
    ("SBDC", "semantic", "similarity_quantile", "Semantic / Topic-Aware", "Semantic Boundary Detection", {"quantile": 0.25}),
    ("DFC", "adaptive", "dynamic", "Adaptive / Dynamic", "Dynamic Token Size Chunking", {"min": 50, "max": 200}),
    ("CDAC", "adaptive", "density", "Adaptive / Dynamic", "Content Density Adaptive Chunking", {"base_size": 1000, "min": 50, "max": 2000}),
    ("SVAC", "adaptive", "variance", "Adaptive / Dynamic", "Semantic Variance Adaptive Chunking", {"sensitivity": 0.2, "window": 5}),
    ("LCSI", "late", "late", "Late Chunking / Index-First", "Late Chunking Sentence Indexing", {"granularity": "sentence"}),
    ("LCPI", "late", "late", "Late Chunking / Index-First", "Late Chunking Paragraph Indexing", {"granularity": "paragraph"}),
    ("LCTS", "late", "late", "Late Chunking / Index-First", "Late Chunking Token Spans", {"granularity": "token_span", "span": 128, "step": 64}),
    ("LBDC", "llm", "llm_boundary", "LLM-Driven", "LLM Boundary Detection Chunking", {"tau": 0.5}),
    ("LSTC", "llm", "llm_segment", "LLM-Driven", "LLM Segment Then Chunk", {"tau": 0.5, "max_tokens": 200, "overlap": 20}),
    ("HSmFC", "hybrid", "hybrid", "Semantic-First Hybrids", "Hybrid Semantic Fixed Token Chunking", {"primary": "SSTC", "size": 200, "overlap": 20}),
    ("HSSC", "hybrid", "hybrid", "Semantic-First Hybrids", "Hybrid Semantic Sliding Window Chunking", {"primary": "SSTC", "size": 50, "overlap": 25}),
    ("HSVFC", "hybrid", "hybrid", "Semantic-First Hybrids", "Hybrid Semantic Variance Fixed Token Chunking", {"primary": "SVAC", "size": 200, "overlap": 20}),
    ("HSnFC", "hybrid", "hybrid", "Structural-First Hybrids", "Hybrid Sentence Fixed Token Chunking", {"primary": "SBC", "size": 200, "overlap": 20}),
    ("HSGC", "hybrid", "hybrid", "Structural-First Hybrids", "Hybrid Sentence Group Fixed Token Chunking", {"primary": "SGC", "size": 200, "overlap": 20}),
    ("HPFC", "hybrid", "hybrid", "Structural-First Hybrids", "Hybrid Paragraph Fixed Token Chunking", {"primary": "PBC", "size": 200, "overlap": 20}),
    ("HPGC", "hybrid", "hybrid", "Structural-First Hybrids", "Hybrid Paragraph Group Fixed Token Chunking", {"primary": "PGC", "size": 200, "overlap": 20}),
    ("HRC", "hybrid", "hybrid", "Structural-First Hybrids", "Hybrid Recursive Fixed Token Chunking", {"primary": "RC", "size": 200, "overlap": 20}),
    ("HFCF", "hybrid", "hybrid", "Structural-First Hybrids", "Hybrid Fixed Char Fixed Token Chunking", {"primary": "FCC", "size": 200, "overlap": 20}),
    ("HOFC", "hybrid", "hybrid", "Structural-First Hybrids", "Hybrid Overlapping Fixed Token Chunking", {"primary": "OFC", "size": 200, "overlap": 20}),
    ("HDFC", "hybrid", "hybrid", "Structural-First Hybrids", "Hybrid Dynamic Fixed Token Chunking", {"primary": "DFC", "size": 200, "overlap": 20}),
    ("HCDC", "hybrid", "hybrid", "Structural-First Hybrids", "Hybrid Content Density Fixed Token Chunking", {"primary": "CDAC", "size": 200, "overlap": 20}),
]

STRATEGY_NAMES: tuple[str, ...] = tuple(row[0] for row in _TABLE)


def _require(cfg: StrategyConfig, *keys: str) -> None:
    missing = [k for k in keys if k not in cfg.params]
    if missing:
        raise ConfigError(f"{cfg.name}: missing parameters {missing}")


def _int(cfg: StrategyConfig, key: str, minimum: int = 0) -> int:
    value = cfg.params[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{cfg.name}: {key} must be an integer >= {minimum}, got {value!r}")
    return value


def _unit(cfg: StrategyConfig, key: str, *, open_interval: bool = False) -> float:
    value = cfg.params[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{cfg.name}: {key} must be a number, got {value!r}")
    ok = 0.0 < value < 1.0 if open_interval else 0.0 <= value <= 1.0
    if not ok:
        raise ConfigError(f"{cfg.name}: {key} out of range: {value}")
    return float(value)


def _size_overlap(cfg: StrategyConfig, size_key: str, overlap_key: str = "overlap") -> None:
    size = _int(cfg, size_key, 1)
    overlap = _int(cfg, overlap_key, 0)
    if overlap >= size:
        raise ConfigError(f"{cfg.name}: overlap {overlap} must be smaller than {size_key} {size}")


def validate(cfg: StrategyConfig, names: set[str] | None = None) -> None:
    """Check that ``cfg`` has complete, in-range parameters for its mechanism."""
    if cfg.family not in FAMILIES:
        raise ConfigError(f"{cfg.name}: unknown family {cfg.family!r}")
    k, p = cfg.kind, cfg.params
    if k in ("char", "token"):
        _require(cfg, "size", "overlap")
        _size_overlap(cfg, "size")
    elif k == "sliding":
        _require(cfg, "window", "step")
        window, step = _int(cfg, "window", 1), _int(cfg, "step", 1)
        if step > window:
            raise ConfigError(f"{cfg.name}: step {step} larger than window {window}")
    elif k == "length_aware":
        _require(cfg, "target", "tolerance")
        if _int(cfg, "tolerance", 0) >= _int(cfg, "target", 1):
            raise ConfigError(f"{cfg.name}: tolerance must be smaller than target")
    elif k == "sentence_group":
        _require(cfg, "sentences", "overlap")
        _size_overlap(cfg, "sentences")
    elif k == "paragraph_group":
        _require(cfg, "paragraphs", "overlap")
        _size_overlap(cfg, "paragraphs")
    elif k == "recursive":
        _require(cfg, "chunk_size", "overlap")
        _size_overlap(cfg, "chunk_size")
    elif k == "recursive_fallback":
        _require(cfg, "token_size", "overlap")
        _size_overlap(cfg, "token_size")
    elif k == "parent_child":
        _require(cfg, "parent", "child")
        if not _int(cfg, "parent", 2) > _int(cfg, "child", 1):
            raise ConfigError(f"{cfg.name}: parent must be larger than child")
    elif k == "similarity_threshold":
        _require(cfg, "threshold")
        _unit(cfg, "threshold")
    elif k == "similarity_quantile":
        _require(cfg, "quantile")
        _unit(cfg, "quantile")
    elif k == "topic":
        _require(cfg, "distance_threshold")
        _unit(cfg, "distance_threshold")
    elif k in ("dynamic", "density"):
        _require(cfg, "min", "max", *(("base_size",) if k == "density" else ()))
        if k == "density":
            _int(cfg, "base_size", 1)
        if not 1 <= _int(cfg, "min", 1) <= _int(cfg, "max", 1):
            raise ConfigError(f"{cfg.name}: need min <= max")
    elif k == "variance":
        _require(cfg, "sensitivity", "window")
        if not isinstance(p["sensitivity"], (int, float)) or p["sensitivity"] < 0:
            raise ConfigError(f"{cfg.name}: sensitivity must be >= 0")
        _int(cfg, "window", 1)
    elif k == "late":
        _require(cfg, "granularity")
        if p["granularity"] not in ("sentence", "paragraph", "token_span"):
            raise ConfigError(f"{cfg.name}: unknown granularity {p['granularity']!r}")
        if p["granularity"] == "token_span":
            _require(cfg, "span", "step")
            if not 1 <= _int(cfg, "step", 1) <= _int(cfg, "span", 1):
                raise ConfigError(f"{cfg.name}: need 1 <= step <= span")
    elif k in ("llm_boundary", "llm_segment"):
        _require(cfg, "tau")
        _unit(cfg, "tau", open_interval=True)
        if k == "llm_segment":
            _require(cfg, "max_tokens", "overlap")
            _size_overlap(cfg, "max_tokens")
    elif k == "hybrid":
        _require(cfg, "primary", "size", "overlap")
        _size_overlap(cfg, "size")
        known = set(STRATEGY_NAMES) if names is None else names
        if p["primary"] not in known:
            raise ConfigError(f"{cfg.name}: unknown primary strategy {p['primary']!r}")
    else:
        raise ConfigError(f"{cfg.name}: unknown mechanism {k!r}")


def _default_configs() -> list[StrategyConfig]:
    return [StrategyConfig(n, fam, kind, label, cat, copy.deepcopy(params)) for n, fam, kind, cat, label, params in _TABLE]


def load_overrides(path: str | Path) -> dict[str, dict[str, Any]]:
    """Read a YAML or JSON mapping of strategy name to parameter overrides."""
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
        raise ConfigError(f"{path}: expected a mapping of strategy name to parameter mapping")
    return data


def build_registry(
    config: str | Path | Mapping[str, Mapping[str, Any]] | None = None,
) -> list[StrategyConfig]:
    """All 36 strategies with default parameters, optionally overridden by name.

    ``config`` may be a path to a YAML/JSON override file or an in-memory
    mapping. Overrides merge into the defaults; unknown strategy names or
    unknown parameter keys are rejected.
    """
    overrides = load_overrides(config) if isinstance(config, (str, Path)) else dict(config or {})
    registry = _default_configs()
    by_name = {c.name: i for i, c in enumerate(registry)}
    for name, params in overrides.items():
        if name not in by_name:
            raise ConfigError(f"unknown strategy {name!r} in overrides")
        base = registry[by_name[name]]
        unknown = set(params) - set(base.params)
        if unknown:
            raise ConfigError(f"{name}: unknown parameters {sorted(unknown)}")
        registry[by_name[name]] = StrategyConfig(
            base.name, base.family, base.kind, base.label, base.category, {**base.params, **params}
        )
    names = set(by_name)
    for cfg in registry:
        validate(cfg, names)
    return registry


def registry_map(registry: list[StrategyConfig] | None = None) -> dict[str, StrategyConfig]:
    return {c.name: c for c in (registry if registry is not None else build_registry())}


@dataclass
class Services:
    """Shared, possibly stateful dependencies handed to every strategy."""

    embedder: EmbeddingProvider | None = None
    llm: ChatProvider | None = None
    embedding_cache: EmbeddingCache | None = None
    boundary_cache: BoundaryCache | None = None
    tokenizer: Tokenizer = DEFAULT_TOKENIZER
    abbreviations: frozenset[str] | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def need_embedder(self, name: str) -> EmbeddingProvider:
        if self.embedder is None:
            raise ConfigError(f"{name} needs an embedding provider")
        return self.embedder

    def need_llm(self, name: str) -> ChatProvider:
        if self.llm is None:
            raise ConfigError(f"{name} needs a chat provider")
        return self.llm


def _run(cfg: StrategyConfig, doc: Document, services: Services, registry: Mapping[str, StrategyConfig], label: str) -> list[Chunk]:
    text, p, k = doc.text, cfg.params, cfg.kind
    tokens = services.tokenizer.tokenize(text)
    ids = {"doc_id": doc.id, "strategy": label}

    def sentences():
        return split_sentences(text, services.abbreviations)

    if k == "char":
        return char_chunk(text, p["size"], p["overlap"], **ids)
    if k == "token":
        return window_chunk(tokens, p["size"], p["size"] - p["overlap"], **ids)
    if k == "sliding":
        return window_chunk(tokens, p["window"], p["step"], **ids)
    if k == "length_aware":
        return dynamic_size_chunk(tokens, sentences(), p["target"] - p["tolerance"], p["target"] + p["tolerance"], **ids)
    if k == "sentence_group":
        return group_chunk(sentences(), p["sentences"], p["overlap"], tokens=tokens, **ids)
    if k == "paragraph_group":
        return group_chunk(split_paragraphs(text), p["paragraphs"], p["overlap"], tokens=tokens, **ids)
    if k == "recursive":
        return recursive_chunk(text, p["chunk_size"], p["overlap"], RECURSIVE_SEPARATORS, tokens=tokens, **ids)
    if k == "recursive_fallback":
        return recursive_chunk(text, p["token_size"], p["overlap"], RTF_SEPARATORS, tokens=tokens, **ids)
    if k == "parent_child":
        return parent_child_chunk(tokens, p["parent"], p["child"], **ids)
    if k == "similarity_threshold":
        return semantic_boundary_chunk(
            sentences(), services.need_embedder(cfg.name), p["threshold"], cache=services.embedding_cache, tokens=tokens, **ids
        )
    if k == "similarity_quantile":
        return semantic_boundary_chunk(
            sentences(), services.need_embedder(cfg.name), None, quantile=p["quantile"],
            cache=services.embedding_cache, tokens=tokens, **ids,
        )
    if k == "topic":
        return topic_chunk(
            sentences(), services.need_embedder(cfg.name), p["distance_threshold"],
            cache=services.embedding_cache, tokens=tokens, **ids,
        )
    if k == "dynamic":
        return dynamic_size_chunk(tokens, sentences(), p["min"], p["max"], **ids)
    if k == "density":
        return density_adaptive_chunk(tokens, p["base_size"], p["min"], p["max"], **ids)
    if k == "variance":
        return variance_adaptive_chunk(
            sentences(), services.need_embedder(cfg.name), p["sensitivity"], p["window"],
            cache=services.embedding_cache, tokens=tokens, **ids,
        )
    if k == "late":
        return [c for c, _ in _late(cfg, doc, services)]
    if k == "llm_boundary":
        return llm_boundary_chunk(sentences(), services.need_llm(cfg.name), p["tau"], cache=services.boundary_cache, tokens=tokens, **ids)
    if k == "llm_segment":
        return llm_segment_then_chunk(
            sentences(), services.need_llm(cfg.name), p["tau"], p["max_tokens"], p["overlap"],
            cache=services.boundary_cache, tokens=tokens, **ids,
        )
    if k == "hybrid":
        primary = registry[p["primary"]]
        segments = _run(primary, doc, services, registry, label)
        return normalize_chunks(segments, p["size"], p["overlap"], source=text, tokens=tokens, **ids)
    raise ConfigError(f"{cfg.name}: unknown mechanism {k!r}")


def _late(cfg: StrategyConfig, doc: Document, services: Services) -> list[tuple[Chunk, Vector]]:
    p = cfg.params
    return late_chunk(
        doc,
        services.need_embedder(cfg.name),
        p["granularity"],
        span=p.get("span", 128),
        step=p.get("step", 64),
        strategy=cfg.name,
        cache=services.embedding_cache,
        tokens=services.tokenizer.tokenize(doc.text),
        abbreviations=services.abbreviations,
        metadata=services.metadata,
    )


def chunk_document(
    cfg: StrategyConfig,
    doc: Document,
    services: Services | None = None,
    registry: Mapping[str, StrategyConfig] | None = None,
) -> list[Chunk]:
    """Run one strategy on one document and return its chunks in source order."""
    services = services or Services()
    registry = registry if registry is not None else registry_map()
    return _run(cfg, doc, services, registry, cfg.name)


def chunk_document_with_vectors(
    cfg: StrategyConfig,
    doc: Document,
    services: Services | None = None,
    registry: Mapping[str, StrategyConfig] | None = None,
) -> tuple[list[Chunk], list[Vector] | None]:
    """Like :func:`chunk_document`, but late-chunking strategies also return their pooled vectors."""
    services = services or Services()
    if cfg.kind == "late":
        pairs = _late(cfg, doc, services)
        return [c for c, _ in pairs], [v for _, v in pairs]
    return chunk_document(cfg, doc, services, registry), None
