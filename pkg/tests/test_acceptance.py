"""Acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line naming the criterion, its
tolerance and the measured runtime, then asserts.
"""

from __future__ import annotations

import random
import time

import numpy as np
import pytest

from chunkbench.bench import RunConfig, run
from chunkbench.chunkers import STRATEGY_NAMES, Services, build_registry, chunk_document, registry_map
from chunkbench.chunkers.llm import MockBoundaryChat
from chunkbench.cli import main
from chunkbench.corpus import Document, Query, dump_documents, dump_queries
from chunkbench.embedding import MockEmbedder, mock_embed
from chunkbench.judge import render_prompt
from chunkbench.metrics import (
    dcg_at_5,
    hit_at_5,
    mrr_at_5,
    ndcg_at_5,
    pareto_frontier,
    percentile,
    pooled_idcg_at_5,
    precision_strict_at_5,
)
from chunkbench.segmentation import split_sentences, tokenize
from chunkbench.vectorstore import VectorIndex

from conftest import synthetic_corpus

# The reference judge prompt, with both placeholders still in place.
REFERENCE_PROMPT = (
    "You are a strict information retrieval judge.\n"
    "\n"
    "Reference Answer:\n"
    "{answer}\n"
    "\n"
    "Retrieved Chunk:\n"
    "{chunk_text}\n"
    "\n"
    "Assign a relevance score:\n"
    "0 = Not relevant\n"
    "1 = Partially relevant\n"
    "2 = Fully relevant\n"
    "\n"
    "Respond with JSON only:\n"
    "{\n"
    '  "score": 0 | 1 | 2,\n'
    '  "reason": "short explanation"\n'
    "}"
)


@pytest.fixture
def verdict(capsys):
    """Print one result line outside pytest's capture, then fail if the check failed."""

    def emit(number: int, title: str, tolerance: str, elapsed: float, budget: float, problems: list[str]) -> None:
        ok = not problems and elapsed < budget
        if elapsed >= budget:
            problems.append(f"runtime {elapsed:.2f}s over budget {budget:g}s")
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} (tolerance {tolerance}; {elapsed:.2f}s of {budget:g}s)")
        assert ok, "; ".join(problems)

    return emit


def close(value: float, expected: float, tol: float) -> bool:
    return abs(value - expected) <= tol


def test_criterion_1_metric_exactness(verdict):
    start = time.perf_counter()
    problems = []
    dcg = dcg_at_5([2, 1, 0, 0, 0])
    idcg = pooled_idcg_at_5([[2, 0, 0, 0, 0], [1, 1, 0, 0, 0]])
    ndcg = ndcg_at_5([2, 0, 0, 0, 0], idcg)
    if not close(dcg, 2.63093, 1e-5):
        problems.append(f"dcg {dcg}")
    if not close(idcg, 3.13093, 1e-5):
        problems.append(f"pooled idcg {idcg}")
    if not close(ndcg, 0.63879, 1e-5):
        problems.append(f"ndcg {ndcg}")
    # "placement at rank 3 yields 0.33"
    rr = mrr_at_5([0, 1, 2, 0, 0])
    if not (close(rr, 1 / 3, 1e-12) and round(rr, 2) == 0.33):
        problems.append(f"mrr {rr}")
    verdict(1, "metric exactness", "1e-5", time.perf_counter() - start, 1, problems)


def test_criterion_2_strictness(verdict):
    start = time.perf_counter()
    problems = []
    if hit_at_5([1, 1, 1, 1, 1]) != 0:
        problems.append("partial gains counted as a hit")
    if precision_strict_at_5([1, 1, 1, 1, 1]) != 0:
        problems.append("partial gains counted in strict precision")
    verdict(2, "strict metrics ignore partial relevance", "exact", time.perf_counter() - start, 1, problems)


def brute_force_idcg(pool: list[list[int]]) -> float:
    """Best DCG achievable from the pooled multiset, by trying every multiset of five and its best order."""
    counts = [sum(g == v for gains in pool for g in gains) for v in (0, 1, 2)]
    best = 0.0
    for twos in range(min(5, counts[2]) + 1):
        for ones in range(min(5 - twos, counts[1]) + 1):
            best = max(best, dcg_at_5([2] * twos + [1] * ones))
    # any order other than descending can only lower the sum
    return best


def test_criterion_3_pooling_bound(verdict):
    start = time.perf_counter()
    rng = random.Random(2024)
    problems = []
    for trial in range(1000):
        pool = [[rng.randint(0, 2) for _ in range(5)] for _ in range(rng.randint(1, 6))]
        idcg = pooled_idcg_at_5(pool)
        if abs(idcg - brute_force_idcg(pool)) > 1e-12:
            problems.append(f"trial {trial}: idcg {idcg} differs from oracle")
        for gains in pool:
            n = ndcg_at_5(gains, idcg)
            if not 0.0 <= n <= 1.0 + 1e-12 or dcg_at_5(gains) > idcg + 1e-12:
                problems.append(f"trial {trial}: bound violated for {gains}")
        if len(problems) > 5:
            break
    verdict(3, "pooled nDCG bound and oracle over 1000 pools", "1e-12", time.perf_counter() - start, 5, problems)


SIZE_LIMITS = {
    # strategy: (max tokens per chunk, min tokens for every chunk but the last)
    "FC": (50, None),
    "OFC": (50, None),
    "SWC": (50, None),
    "LAC": (600, 400),
    "RTF": (100, None),
    "PCC": (100, None),
    "DFC": (200, 50),
    "CDAC": (2000, 50),
    "LSTC": (200, None),
    "LCTS": (128, None),
    "HSSC": (50, None),
}


def check_invariants(name: str, doc: Document, chunks) -> list[str]:
    problems = []
    if [c.seq for c in chunks] != list(range(len(chunks))):
        problems.append(f"{name}/{doc.id}: seq not 0..n-1")
    starts = [c.char_span[0] for c in chunks]
    if any(b <= a for a, b in zip(starts, starts[1:])):
        problems.append(f"{name}/{doc.id}: chunk starts not strictly increasing")
    covered = np.zeros(len(doc.text), dtype=bool)
    for c in chunks:
        a, b = c.char_span
        if doc.text[a:b] != c.text:
            problems.append(f"{name}/{doc.id}: chunk {c.seq} text does not match its span")
        covered[a:b] = True
    missing = [i for i, ch in enumerate(doc.text) if not ch.isspace() and not covered[i]]
    if missing:
        problems.append(f"{name}/{doc.id}: {len(missing)} non-space characters uncovered")
    sizes = [len(tokenize(c.text)) for c in chunks]
    hi, lo = SIZE_LIMITS.get(name, (200 if name.startswith("H") else None, None))
    if hi is not None and any(s > hi for s in sizes):
        problems.append(f"{name}/{doc.id}: chunk over {hi} tokens ({max(sizes)})")
    if lo is not None and any(s < lo for s in sizes[:-1]):
        problems.append(f"{name}/{doc.id}: non-final chunk under {lo} tokens ({min(sizes[:-1])})")
    if name == "FCC" and any(len(c.text) > 100 for c in chunks):
        problems.append(f"{name}/{doc.id}: chunk over 100 characters")
    if name == "RC" and any(s > 500 for s in sizes):
        problems.append(f"{name}/{doc.id}: chunk over 500 tokens")
    return problems


def sstc_expected_spans(text: str, theta: float) -> list[tuple[int, int]]:
    """Recompute threshold boundaries from scratch with plain numpy cosines."""
    sents = split_sentences(text)
    vecs = [mock_embed(s).values.astype(np.float64) for s in sents.texts]
    spans, first = [], 0
    for i in range(len(vecs) - 1):
        a, b = vecs[i], vecs[i + 1]
        if float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b))) < theta:
            spans.append((sents[first].start, sents[i].end))
            first = i + 1
    if len(sents):
        spans.append((sents[first].start, sents[len(sents) - 1].end))
    return spans


def test_criterion_4_chunker_conformance(verdict):
    start = time.perf_counter()
    problems = []
    registry = build_registry(None)
    by_name = registry_map(registry)
    if len(registry) != 36 or len(set(STRATEGY_NAMES)) != 36:
        problems.append(f"registry has {len(registry)} strategies")
    expected_params = {
        "PGC": {"paragraphs": 2, "overlap": 1},
        "SSTC": {"threshold": 0.6},
        "DFC": {"min": 50, "max": 200},
        "LCTS": {"granularity": "token_span", "span": 128, "step": 64},
    }
    for name, params in expected_params.items():
        if by_name[name].params != params:
            problems.append(f"{name} params {by_name[name].params}")

    docs = synthetic_corpus()
    if len(tokenize(docs[2].text)) <= 2000:
        problems.append("long synthetic document is not over 2000 tokens")
    services = Services(embedder=MockEmbedder(), llm=MockBoundaryChat())
    for cfg in registry:
        for doc in docs:
            chunks = chunk_document(cfg, doc, services, by_name)
            problems += check_invariants(cfg.name, doc, chunks)
            if cfg.name == "SSTC" and [c.char_span for c in chunks] != sstc_expected_spans(doc.text, 0.6):
                problems.append(f"SSTC/{doc.id}: boundaries differ from recomputed similarities")
            if cfg.name == "PCC":
                parents: dict[str, list] = {}
                for c in chunks:
                    parents.setdefault(c.parent_id, []).append(c)
                tokens = tokenize(doc.text)
                covered = sum(len(tokenize(c.text)) for c in chunks)
                if covered != len(tokens) or any(c.parent_id is None for c in chunks):
                    problems.append(f"PCC/{doc.id}: children do not partition the parents")
                for kids in parents.values():
                    if sum(len(tokenize(k.text)) for k in kids) > 500:
                        problems.append(f"PCC/{doc.id}: parent over 500 tokens")
    verdict(4, "all 36 strategies on the synthetic corpus", "exact invariants", time.perf_counter() - start, 60, problems)


def test_criterion_5_retrieval_exactness(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    problems = []
    base = rng.normal(size=(150, 64))
    # 50 exact duplicates, stored under ids that sort before and after their twins
    vectors = np.vstack([base, base[:50]])
    ids = [f"v{i:03d}" for i in range(150)] + [f"u{i:03d}" for i in range(50)]
    index = VectorIndex()
    for cid, v in zip(ids, vectors):
        index.upsert(cid, v)
    index.seal()
    # the index stores float32 unit vectors, so the oracle scores the same rounded rows
    unit = (vectors / np.linalg.norm(vectors, axis=1, keepdims=True)).astype(np.float32).astype(np.float64)
    for qi in range(100):
        q = rng.normal(size=64) if qi % 2 else vectors[rng.integers(0, 200)]
        sims = unit @ (q / np.linalg.norm(q))
        oracle = sorted(range(200), key=lambda i: (-sims[i], ids[i]))[:5]
        got = [h.chunk_id for h in index.top_k(q, 5)]
        if got != [ids[i] for i in oracle]:
            problems.append(f"query {qi}: {got} != {[ids[i] for i in oracle]}")
    verdict(5, "top-k equals brute-force cosine sort with ties", "exact order", time.perf_counter() - start, 5, problems)


def test_criterion_6_end_to_end_determinism(verdict, tmp_path, toy_docs, toy_queries):
    start = time.perf_counter()
    problems = []
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        argv = ["run", "--docs", str(toy_docs), "--queries", str(toy_queries), "--out", str(out), "--deterministic"]
        if main(argv) != 0:
            problems.append(f"{name} run exited non-zero")
        outputs.append((out / "results.csv").read_bytes())
    if outputs[0] != outputs[1]:
        problems.append("results.csv differs between runs")
    rows = outputs[0].decode().strip().splitlines()[1:]
    if len(rows) != 72:
        problems.append(f"{len(rows)} result rows, expected 72")
    verdict(6, "two full runs give byte-identical results.csv", "byte-identical, 72 rows", time.perf_counter() - start, 300, problems)


def pseudo_words(rng: np.random.Generator, n: int) -> list[str]:
    consonants, vowels = list("bcdfghjklmnprstvz"), list("aeiou")
    out: set[str] = set()
    while len(out) < n:
        out.add("".join(rng.choice(consonants) + rng.choice(vowels) for _ in range(int(rng.integers(3, 5)))))
    return sorted(out)


def constructed_corpus(n_docs: int = 8, paragraphs: int = 5, seed: int = 11):
    """Each answer's ten words are spread across one ~240-character paragraph; the query shares other words of it."""
    rng = np.random.default_rng(seed)
    vocab = iter(pseudo_words(rng, n_docs * paragraphs * 30))
    docs, queries = [], []
    for d in range(n_docs):
        paras = []
        for p in range(paragraphs):
            ws = [next(vocab) for _ in range(30)]
            paras.append(" ".join(ws).capitalize() + ".")
            if p == 2:
                queries.append(Query(f"q{d}", "constructed", " ".join(ws[1::6]), " ".join(ws[::3])))
        docs.append(Document(f"d{d}", "constructed", "\n\n".join(paras)))
    return docs, queries


def test_criterion_7_directional_sanity(verdict, tmp_path):
    start = time.perf_counter()
    problems = []
    docs, queries = constructed_corpus()
    if min(len(p) for d in docs for p in d.text.split("\n\n")) <= 100:
        problems.append("constructed paragraphs are not all over 100 characters")
    dump_documents(tmp_path / "docs.jsonl", docs)
    dump_queries(tmp_path / "queries.jsonl", queries)
    cfg = RunConfig(docs=tmp_path / "docs.jsonl", queries=tmp_path / "queries.jsonl", out=tmp_path / "run", strategies=["PGC", "FCC"])
    _, records = run(cfg)
    by = {r.config.strategy_id: r for r in records}
    pgc, fcc = by["PGC"], by["FCC"]
    if pgc.hit_rate != 1.0:
        problems.append(f"PGC hit rate {pgc.hit_rate}")
    margin = pgc.ndcg_mean - fcc.ndcg_mean
    if margin < 0.05:
        problems.append(f"nDCG margin {margin:.4f}")
    title = f"PGC beats FCC (PGC {pgc.ndcg_mean:.3f}, FCC {fcc.ndcg_mean:.3f}, hit {pgc.hit_rate:.2f})"
    verdict(7, title, "margin >= 0.05", time.perf_counter() - start, 120, problems)


def test_criterion_8_efficiency_plumbing(verdict):
    start = time.perf_counter()
    problems = []
    if percentile([3, 1, 2], 50) != 2 or percentile(list(range(1, 101)), 95) != 95:
        problems.append("nearest-rank percentile")
    index = VectorIndex()
    rng = np.random.default_rng(8)
    for i in range(10):
        index.upsert(f"chunk-{i}", rng.normal(size=64))
    stats = index.stats()
    expected = 10 * 64 * 4 + sum(4 + len(f"chunk-{i}") for i in range(10)) + 17
    if stats.size_bytes != expected:
        problems.append(f"index bytes {stats.size_bytes} != {expected}")
    front = pareto_frontier([(0.5, 100, "a"), (0.4, 50, "b"), (0.3, 200, "c")])
    if front != ["b", "a"]:
        problems.append(f"pareto frontier {front}")
    verdict(8, "percentiles, index size and Pareto frontier", "exact", time.perf_counter() - start, 1, problems)


def test_criterion_9_judge_prompt_fidelity(verdict):
    start = time.perf_counter()
    problems = []
    rng = random.Random(9)
    alphabet = "abcdefghijklmnopqrstuvwxyz {}\"'\n"
    for i in range(100):
        query = f"QUERYTOKEN{i} " + "".join(rng.choice(alphabet) for _ in range(30))
        answer = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 80))) + "x"
        chunk = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 200))) + "y"
        prompt = render_prompt(answer, chunk)
        expected = REFERENCE_PROMPT.replace("{answer}", "\0A").replace("{chunk_text}", "\0C")
        expected = expected.replace("\0A", answer).replace("\0C", chunk)
        if prompt != expected:
            problems.append(f"case {i}: prompt differs from the reference block")
        for line in ("0 = Not relevant", "1 = Partially relevant", "2 = Fully relevant"):
            if f"\n{line}\n" not in prompt:
                problems.append(f"case {i}: missing scale line {line!r}")
        if f"QUERYTOKEN{i}" in prompt or query in prompt:
            problems.append(f"case {i}: query text leaked into the prompt")
        if len(problems) > 5:
            break
    verdict(9, "judge prompt matches the reference block", "byte-identical", time.perf_counter() - start, 5, problems)
