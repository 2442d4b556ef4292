"""Two-phase experiment grid: per-cell retrieval and judging, then pooled scoring.

Phase 1 runs every (model, domain, strategy) cell independently and
persists its artifacts under ``cells/``. Phase 2 needs every strategy's
gains for a query before any nDCG can be computed, because the ideal DCG
is pooled across strategies for each (query, model, domain).
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from .chunkers import Chunk, Services, StrategyConfig, build_registry, chunk_document_with_vectors, registry_map
from .chunkers.llm import BoundaryCache, MockBoundaryChat
from .corpus import Document, Query, RetrievalQuery, load_documents, load_queries, partition_by_domain
from .embedding import EmbeddingCache, EmbeddingProvider, HttpEmbedder, MockEmbedder, Vector, embed_texts
from .errors import ConfigError
from .judge import Judge, JudgmentCache
from .llm import ChatProvider, HttpChatProvider
from .metrics import K, MetricsRecord, aggregate, pooled_idcg_at_5, score_query
from .profiler import EfficiencyReport, latency_trial, measure
from .segmentation import DEFAULT_TOKENIZER, load_abbreviations
from .vectorstore import IndexKey, ScoredHit, VectorIndex

logger = logging.getLogger(__name__)

DONE = "DONE"
FAILED = "FAILED"


@dataclass
class RunConfig:
    docs: Path
    queries: Path
    out: Path
    strategies: list[str] = field(default_factory=list)
    embedder: str = "mock"
    embed_models: list[str] = field(default_factory=list)
    judge: str = "mock"
    judge_model: str | None = None
    llm: str = "mock"
    k: int = K
    workers: int = 1
    ultradomain_adapter: bool = False
    registry: Path | None = None
    abbreviations: Path | None = None
    cache_dir: Path | None = None
    deterministic: bool = False
    ci: str = "normal"
    seed: int = 0
    warmup: int = 3
    judge_concurrency: int = 4

    def __post_init__(self) -> None:
        self.docs, self.queries, self.out = Path(self.docs), Path(self.queries), Path(self.out)
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        for name, value, allowed in (
            ("embedder", self.embedder, ("mock", "http")),
            ("judge", self.judge, ("mock", "http")),
            ("llm", self.llm, ("mock", "http")),
            ("ci", self.ci, ("normal", "bootstrap")),
        ):
            if value not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {value!r}")
        if self.embedder == "http" and not self.embed_models:
            raise ConfigError("an http embedder needs at least one model name")
        known = {c.name for c in build_registry(self.registry)}
        unknown = [s for s in self.strategies if s not in known]
        if unknown:
            raise ConfigError(f"unknown strategies: {unknown}")

    @property
    def caches(self) -> Path:
        return Path(self.cache_dir) if self.cache_dir is not None else self.out / "cache"

    def to_json(self) -> dict[str, Any]:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, Path):
                data[key] = str(value)
        return data


def safe_name(text: str) -> str:
    """A path component that round-trips model names like ``org/model``."""
    return re.sub(r"[^A-Za-z0-9._-]", "_", text.replace("/", "__"))


def atomic_write(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
    if isinstance(data, bytes):
        tmp.write_bytes(data)
    else:
        tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


def _jsonl(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)


def retrieve(
    index: VectorIndex, queries: Sequence[RetrievalQuery], vectors: Sequence[Vector], k: int = K
) -> dict[str, list[ScoredHit]]:
    """Top-``k`` hits per query. Only the retrieval projection of a query is accepted here."""
    for q in queries:
        if not isinstance(q, RetrievalQuery):
            raise TypeError("retrieval takes RetrievalQuery objects, which carry no golden answer")
    return {q.id: index.top_k(v, k) for q, v in zip(queries, vectors)}


@dataclass
class Grid:
    """Resolved providers and the corpus for one run."""

    config: RunConfig
    documents: dict[str, list[Document]]
    queries: dict[str, list[Query]]
    strategies: list[StrategyConfig]
    embedders: dict[str, EmbeddingProvider]
    llm: ChatProvider
    judge: Judge
    embedding_cache: EmbeddingCache
    boundary_cache: BoundaryCache
    abbreviations: frozenset[str] | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def cells(self) -> list[IndexKey]:
        return [
            IndexKey(m, d, s.name)
            for m in self.embedders
            for d in sorted(self.documents)
            for s in self.strategies
        ]

    def cell_dir(self, key: IndexKey) -> Path:
        return self.config.out / "cells" / safe_name(key.model_id) / safe_name(key.domain) / safe_name(key.strategy_id)


def _make_embedders(config: RunConfig) -> dict[str, EmbeddingProvider]:
    if config.embedder == "mock":
        names = config.embed_models or ["mock-3gram-64"]
        return {name: MockEmbedder(model_id=name) for name in names}
    return {name: HttpEmbedder(name) for name in config.embed_models}


def build_grid(
    config: RunConfig,
    *,
    embedders: dict[str, EmbeddingProvider] | None = None,
    llm: ChatProvider | None = None,
    judge_provider: ChatProvider | None = None,
) -> Grid:
    """Load the corpus and construct providers; explicit providers override the config's choices."""
    docs = load_documents(config.docs, ultradomain_adapter=config.ultradomain_adapter)
    by_domain = partition_by_domain(docs)
    queries = load_queries(config.queries, ultradomain_adapter=config.ultradomain_adapter, domains=by_domain)
    registry = build_registry(config.registry)
    wanted = config.strategies or [c.name for c in registry]
    by_name = registry_map(registry)
    if llm is None:
        llm = MockBoundaryChat() if config.llm == "mock" else HttpChatProvider(env_prefix="LLM")
    if judge_provider is None and config.judge == "http":
        judge_provider = HttpChatProvider(config.judge_model)
    caches = config.caches
    judge = Judge(
        judge_provider,
        cache=JudgmentCache(caches / "judgments.jsonl"),
        concurrency=config.judge_concurrency,
    )
    return Grid(
        config=config,
        documents=by_domain,
        queries=partition_by_domain(queries),
        strategies=[by_name[s] for s in wanted],
        embedders=embedders if embedders is not None else _make_embedders(config),
        llm=llm,
        judge=judge,
        embedding_cache=EmbeddingCache(caches / "embeddings"),
        boundary_cache=BoundaryCache(),
        abbreviations=load_abbreviations(config.abbreviations) if config.abbreviations else None,
    )


def run_cell(grid: Grid, key: IndexKey, *, registry: dict[str, StrategyConfig] | None = None) -> dict[str, Any]:
    """Chunk, embed, index, retrieve and judge one cell, then persist its artifacts."""
    config = grid.config
    strategy = next(s for s in grid.strategies if s.name == key.strategy_id)
    embedder = grid.embedders[key.model_id]
    docs = grid.documents[key.domain]
    queries = grid.queries.get(key.domain, [])
    services = Services(
        embedder=embedder,
        llm=grid.llm,
        embedding_cache=grid.embedding_cache,
        boundary_cache=grid.boundary_cache,
        abbreviations=grid.abbreviations,
    )
    registry = registry or registry_map(build_registry(config.registry))

    def chunk_all() -> list[tuple[list[Chunk], list[Vector] | None]]:
        return [chunk_document_with_vectors(strategy, doc, services, registry) for doc in docs]

    per_doc, chunk_time, peak_mb = measure(chunk_all)
    chunks = [c for cs, _ in per_doc for c in cs]

    late_vectors = [v for _, vs in per_doc if vs is not None for v in vs]
    if late_vectors:
        vectors = late_vectors
    else:
        vectors = embed_texts(embedder, [c.text for c in chunks], cache=grid.embedding_cache) if chunks else []

    index = VectorIndex(embedder.dim or None)
    for chunk, vec in zip(chunks, vectors):
        index.upsert(chunk.id, vec)
    index.seal()

    projections = [q.for_retrieval() for q in queries]
    query_vectors = (
        embed_texts(embedder, [q.text for q in projections], cache=grid.embedding_cache, role="query")
        if projections
        else []
    )
    hits = retrieve(index, projections, query_vectors, config.k)
    latencies = (
        latency_trial(index, query_vectors, config.k, warmup=config.warmup) if len(index) and query_vectors else []
    )

    # Golden answers are consulted only from here on, after retrieval is complete.
    text_of = {c.id: c.text for c in chunks}
    items = [(q.id, h.chunk_id, q.golden_answer, text_of[h.chunk_id]) for q in queries for h in hits[q.id]]
    judgments = grid.judge.judge_many(items)
    by_pair = {(j.query_id, j.chunk_id): j for j in judgments}

    gain_records = []
    for q in queries:
        q_hits = hits[q.id]
        gain_records.append(
            {
                "query_id": q.id,
                "chunk_ids": [h.chunk_id for h in q_hits],
                "scores": [round(h.score, 7) for h in q_hits],
                "gains": [by_pair[(q.id, h.chunk_id)].gain for h in q_hits],
            }
        )

    cell = grid.cell_dir(key)
    cell.mkdir(parents=True, exist_ok=True)
    (cell / FAILED).unlink(missing_ok=True)
    index_bytes = index.save(cell / ".index.tmp")
    os.replace(cell / ".index.tmp", cell / "index.cbix")
    efficiency = EfficiencyReport(chunk_time, peak_mb, len(chunks), index_bytes, latencies)
    atomic_write(cell / "chunks.jsonl", _jsonl(c.to_json() for c in chunks))
    atomic_write(cell / "gains.jsonl", _jsonl(gain_records))
    atomic_write(cell / "judgments.jsonl", _jsonl(j.to_json() for j in judgments))
    atomic_write(cell / "efficiency.json", json.dumps(efficiency.to_json(), indent=2, sort_keys=True))
    atomic_write(
        cell / DONE,
        json.dumps({"model": key.model_id, "domain": key.domain, "strategy": key.strategy_id}, sort_keys=True),
    )
    return {"chunks": len(chunks), "queries": len(queries)}


def run_phase1(
    config: RunConfig,
    *,
    grid: Grid | None = None,
    progress: Callable[[IndexKey, str], None] | None = None,
) -> dict[str, Any]:
    """Run every pending cell; completed cells are skipped and failures are recorded, not raised."""
    grid = grid or build_grid(config)
    config.out.mkdir(parents=True, exist_ok=True)
    registry = registry_map(build_registry(config.registry))
    cells = grid.cells()
    atomic_write(config.out / "run.json", json.dumps(_run_manifest(grid, cells), indent=2, sort_keys=True))

    skipped, failed, completed = [], [], []
    lock = threading.Lock()

    def work(key: IndexKey) -> None:
        cell = grid.cell_dir(key)
        if (cell / DONE).exists():
            with lock:
                skipped.append(key)
            return
        try:
            run_cell(grid, key, registry=registry)
        except Exception as exc:
            logger.error("cell %s/%s/%s failed: %s", key.model_id, key.domain, key.strategy_id, exc)
            atomic_write(cell / FAILED, "".join(traceback.format_exception(type(exc), exc, exc.__traceback__)))
            with lock:
                failed.append((key, f"{type(exc).__name__}: {exc}"))
            status = "failed"
        else:
            with lock:
                completed.append(key)
            status = "done"
        if progress is not None:
            progress(key, status)

    if config.workers == 1:
        for key in cells:
            work(key)
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(work, cells))

    summary = {
        "cells": len(cells),
        "completed": len(completed),
        "skipped": len(skipped),
        "failed": [
            {"model": k.model_id, "domain": k.domain, "strategy": k.strategy_id, "error": msg}
            for k, msg in sorted(failed, key=lambda t: t[0])
        ],
        "judge_provider_calls": grid.judge.provider_calls,
    }
    atomic_write(config.out / "phase1.json", json.dumps(summary, indent=2, sort_keys=True))
    return summary


def _run_manifest(grid: Grid, cells: list[IndexKey]) -> dict[str, Any]:
    fallbacks = sorted(m for m, e in grid.embedders.items() if not e.supports_token_level)
    return {
        "config": grid.config.to_json(),
        "models": list(grid.embedders),
        "domains": sorted(grid.documents),
        "strategies": [s.name for s in grid.strategies],
        "strategy_params": {s.name: s.to_json() for s in grid.strategies},
        "cells": [[k.model_id, k.domain, k.strategy_id] for k in cells],
        "queries": {d: [q.id for q in qs] for d, qs in sorted(grid.queries.items())},
        "judge_model": grid.judge.model,
        "llm_model": grid.llm.model,
        "tokenizer": DEFAULT_TOKENIZER.name,
        "late_chunking_fallback": fallbacks,
        "index": "exact exhaustive cosine search; approximate-index settings do not apply",
    }


@dataclass
class CellResult:
    key: IndexKey
    gains: dict[str, list[int]]
    degraded: int
    efficiency: EfficiencyReport


def load_cell(run_dir: Path, key: IndexKey) -> CellResult | None:
    cell = run_dir / "cells" / safe_name(key.model_id) / safe_name(key.domain) / safe_name(key.strategy_id)
    if not (cell / DONE).exists():
        return None
    gains = {}
    for line in (cell / "gains.jsonl").read_text(encoding="utf-8").splitlines():
        if line.strip():
            rec = json.loads(line)
            gains[rec["query_id"]] = rec["gains"]
    degraded = 0
    for line in (cell / "judgments.jsonl").read_text(encoding="utf-8").splitlines():
        if line.strip() and json.loads(line)["degraded"]:
            degraded += 1
    efficiency = EfficiencyReport.from_json(json.loads((cell / "efficiency.json").read_text(encoding="utf-8")))
    return CellResult(key, gains, degraded, efficiency)


def run_phase2(run_dir: str | Path, *, ci: str | None = None, seed: int | None = None) -> list[MetricsRecord]:
    """Pool ideal gains per (query, model, domain) and aggregate one record per completed cell."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    ci = ci or manifest["config"].get("ci", "normal")
    seed = manifest["config"].get("seed", 0) if seed is None else seed
    records: list[MetricsRecord] = []
    for model in manifest["models"]:
        for domain in manifest["domains"]:
            query_ids = sorted(manifest["queries"].get(domain, []))
            results = []
            for strategy in manifest["strategies"]:
                result = load_cell(run_dir, IndexKey(model, domain, strategy))
                if result is None:
                    logger.warning("cell %s/%s/%s missing; pooling over the remaining strategies", model, domain, strategy)
                    continue
                results.append(result)
            if not results or not query_ids:
                continue
            idcg = {q: pooled_idcg_at_5(r.gains.get(q, []) for r in results) for q in query_ids}
            for r in results:
                scores = [score_query(q, r.gains.get(q, []), idcg[q]) for q in query_ids]
                record = aggregate(r.key, scores, ci=ci, seed=seed)
                eff = r.efficiency
                record.efficiency = {
                    "chunk_time_s": eff.chunk_time_s,
                    "peak_ram_mb": eff.peak_ram_mb,
                    "chunk_count": eff.chunk_count,
                    "index_bytes": eff.index_bytes,
                    "latency_p50_ms": eff.latency_p50_ms,
                    "latency_p95_ms": eff.latency_p95_ms,
                }
                record.degraded_judgments = r.degraded
                records.append(record)
    return records


def run(config: RunConfig, **providers: Any) -> tuple[dict[str, Any], list[MetricsRecord]]:
    summary = run_phase1(config, grid=build_grid(config, **providers) if providers else None)
    return summary, run_phase2(config.out)
