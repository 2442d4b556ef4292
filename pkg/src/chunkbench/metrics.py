"""Graded and strict ranking metrics, aggregation, correlation, percentiles and Pareto frontiers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import AggregationError, UndefinedCorrelationError
from .vectorstore import IndexKey

K = 5
FULL = 2
Z_95 = 1.96


@dataclass(frozen=True)
class GainList:
    query_id: str
    config: IndexKey
    gains: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.gains) > K:
            raise ValueError(f"at most {K} gains per query, got {len(self.gains)}")
        if any(g not in (0, 1, 2) for g in self.gains):
            raise ValueError(f"gains must be 0, 1 or 2: {self.gains}")


def _discount(rank: int) -> float:
    return 1.0 / math.log2(rank + 1)


def dcg_at_5(gains: Sequence[int]) -> float:
    return sum(g * _discount(i) for i, g in enumerate(gains[:K], start=1))


def pooled_idcg_at_5(pool: Iterable[Sequence[int]]) -> float:
    """Ideal DCG from the best five gains observed for one query across all strategies."""
    merged = sorted((g for gains in pool for g in gains), reverse=True)
    return dcg_at_5(merged[:K])


def ndcg_at_5(gains: Sequence[int], idcg: float) -> float:
    return dcg_at_5(gains) / idcg if idcg > 0 else 0.0


def hit_at_5(gains: Sequence[int]) -> int:
    return int(FULL in gains[:K])


def mrr_at_5(gains: Sequence[int]) -> float:
    for rank, g in enumerate(gains[:K], start=1):
        if g == FULL:
            return 1.0 / rank
    return 0.0


def precision_at_1(gains: Sequence[int]) -> int:
    return int(bool(gains) and gains[0] == FULL)


def precision_strict_at_5(gains: Sequence[int]) -> float:
    """Fully relevant hits over a fixed denominator of 5, even for shorter lists."""
    return sum(1 for g in gains[:K] if g == FULL) / K


@dataclass(frozen=True)
class QueryScores:
    query_id: str
    ndcg: float
    hit: int
    mrr: float
    p_at_1: int
    p_strict: float


def score_query(query_id: str, gains: Sequence[int], idcg: float) -> QueryScores:
    return QueryScores(
        query_id,
        ndcg_at_5(gains, idcg),
        hit_at_5(gains),
        mrr_at_5(gains),
        precision_at_1(gains),
        precision_strict_at_5(gains),
    )


@dataclass(frozen=True)
class Summary:
    mean: float
    median: float
    variance: float
    ci_low: float
    ci_high: float
    n: int


def summarize(values: Sequence[float], *, ci: str = "normal", resamples: int = 1000, seed: int = 0) -> Summary:
    """Mean, median, sample variance and a 95% confidence interval.

    ``ci="normal"`` uses mean ± 1.96·s/√n; ``ci="bootstrap"`` takes the 2.5th
    and 97.5th percentiles of ``resamples`` bootstrap means drawn with a
    fixed seed. A single value has zero variance and a degenerate interval.
    Intervals are clipped to [0, 1] because every metric lives there.
    """
    n = len(values)
    if n == 0:
        raise AggregationError("cannot aggregate zero queries")
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    variance = float(arr.var(ddof=1)) if n > 1 else 0.0
    if ci == "normal":
        half = Z_95 * math.sqrt(variance / n)
        low, high = mean - half, mean + half
    elif ci == "bootstrap":
        rng = np.random.default_rng(seed)
        means = arr[rng.integers(0, n, size=(resamples, n))].mean(axis=1)
        low, high = (float(x) for x in np.quantile(means, [0.025, 0.975]))
        low, high = min(low, mean), max(high, mean)
    else:
        raise ValueError(f"unknown ci method {ci!r}")
    return Summary(mean, float(np.median(arr)), variance, max(0.0, low), min(1.0, high), n)


@dataclass
class MetricsRecord:
    config: IndexKey
    n_queries: int
    ndcg_mean: float
    ndcg_ci_low: float
    ndcg_ci_high: float
    hit_rate: float
    mrr_mean: float
    p_at_1: float
    p_strict_at_5: float
    zero_hit_fraction: float
    efficiency: dict[str, float | int | None] = field(default_factory=dict)
    degraded_judgments: int = 0
    ndcg_median: float = 0.0
    ndcg_variance: float = 0.0
    per_query_ndcg: list[float] = field(default_factory=list)


def aggregate(
    config: IndexKey, scores: Sequence[QueryScores], *, ci: str = "normal", seed: int = 0
) -> MetricsRecord:
    """Average per-query scores in query-id order so results are bit-stable."""
    if not scores:
        raise AggregationError(f"no queries to aggregate for {config}")
    ordered = sorted(scores, key=lambda s: s.query_id)
    ndcg = summarize([s.ndcg for s in ordered], ci=ci, seed=seed)
    n = len(ordered)

    def mean(xs: Iterable[float]) -> float:
        return float(np.mean(list(xs)))

    return MetricsRecord(
        config=config,
        n_queries=n,
        ndcg_mean=ndcg.mean,
        ndcg_ci_low=ndcg.ci_low,
        ndcg_ci_high=ndcg.ci_high,
        hit_rate=mean(s.hit for s in ordered),
        mrr_mean=mean(s.mrr for s in ordered),
        p_at_1=mean(s.p_at_1 for s in ordered),
        p_strict_at_5=mean(s.p_strict for s in ordered),
        zero_hit_fraction=sum(1 for s in ordered if s.hit == 0) / n,
        ndcg_median=ndcg.median,
        ndcg_variance=ndcg.variance,
        per_query_ndcg=[s.ndcg for s in ordered],
    )


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise UndefinedCorrelationError("need at least two points")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation with a constant series is undefined")
    return max(-1.0, min(1.0, float(dx @ dy) / math.sqrt(sxx * syy)))


def percentile(samples: Sequence[float], p: float) -> float:
    """Nearest-rank percentile: the ⌈p·n/100⌉-th smallest sample."""
    if not samples:
        raise ValueError("percentile of an empty sample")
    if not 0 < p <= 100:
        raise ValueError(f"p must be in (0, 100], got {p}")
    ordered = sorted(samples)
    rank = math.ceil(p * len(ordered) / 100)
    return ordered[max(rank, 1) - 1]


def pareto_frontier(points: Sequence[tuple[float, float, Hashable]]) -> list[Hashable]:
    """Labels of points not dominated on (higher effectiveness, lower cost), cheapest first.

    A point is dominated when another is at least as effective and at most
    as costly, and strictly better on one of the two.
    """
    frontier = []
    for eff, cost, label in points:
        dominated = any(
            e >= eff and c <= cost and (e > eff or c < cost) for e, c, _ in points
        )
        if not dominated:
            frontier.append((cost, -eff, str(label), label))
    return [label for *_, label in sorted(frontier, key=lambda t: t[:3])]
