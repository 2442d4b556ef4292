"""Tabular, JSON and SVG outputs for a set of metrics records."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import AggregationError, UndefinedCorrelationError
from .metrics import MetricsRecord, pareto_frontier, pearson

RESULT_COLUMNS = (
    "model",
    "domain",
    "strategy",
    "n_queries",
    "ndcg_mean",
    "ndcg_ci_low",
    "ndcg_ci_high",
    "hit_rate",
    "mrr_mean",
    "p_at_1",
    "p_strict_at_5",
    "zero_hit_fraction",
    "chunk_time_s",
    "peak_ram_mb",
    "chunk_count",
    "index_bytes",
    "latency_p50_ms",
    "latency_p95_ms",
    "degraded_judgments",
)

# Columns that depend on the host and scheduler rather than on the inputs.
VOLATILE_COLUMNS = frozenset({"chunk_time_s", "peak_ram_mb", "latency_p50_ms", "latency_p95_ms"})

CORRELATION_COLUMNS = (
    "ndcg_mean",
    "hit_rate",
    "mrr_mean",
    "p_at_1",
    "p_strict_at_5",
    "zero_hit_fraction",
    "chunk_time_s",
    "peak_ram_mb",
    "chunk_count",
    "index_bytes",
    "latency_p50_ms",
    "latency_p95_ms",
)


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else f"{value:.6f}"
    return str(value)


def record_row(record: MetricsRecord) -> dict[str, Any]:
    key = record.config
    row: dict[str, Any] = {
        "model": key.model_id,
        "domain": key.domain,
        "strategy": key.strategy_id,
        "n_queries": record.n_queries,
        "ndcg_mean": record.ndcg_mean,
        "ndcg_ci_low": record.ndcg_ci_low,
        "ndcg_ci_high": record.ndcg_ci_high,
        "hit_rate": record.hit_rate,
        "mrr_mean": record.mrr_mean,
        "p_at_1": record.p_at_1,
        "p_strict_at_5": record.p_strict_at_5,
        "zero_hit_fraction": record.zero_hit_fraction,
        "degraded_judgments": record.degraded_judgments,
    }
    for name in ("chunk_time_s", "peak_ram_mb", "chunk_count", "index_bytes", "latency_p50_ms", "latency_p95_ms"):
        row[name] = record.efficiency.get(name)
    return row


def _sorted(records: Iterable[MetricsRecord]) -> list[MetricsRecord]:
    return sorted(records, key=lambda r: (r.config.model_id, r.config.domain, r.config.strategy_id))


def _csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def results_csv(records: Sequence[MetricsRecord], *, deterministic: bool = False) -> str:
    """One row per cell in a fixed column order; volatile columns are blank when ``deterministic``."""
    rows = []
    for record in _sorted(records):
        row = record_row(record)
        rows.append([None if deterministic and c in VOLATILE_COLUMNS else row[c] for c in RESULT_COLUMNS])
    return _csv(RESULT_COLUMNS, rows)


def correlation_matrix(records: Sequence[MetricsRecord], columns: Sequence[str] = CORRELATION_COLUMNS) -> np.ndarray:
    """Pearson correlations between numeric columns; NaN where a column is constant."""
    rows = [record_row(r) for r in records]
    series = [[float(row[c]) if row[c] is not None else math.nan for row in rows] for c in columns]
    out = np.full((len(columns), len(columns)), math.nan)
    for i, xs in enumerate(series):
        for j, ys in enumerate(series):
            if any(math.isnan(v) for v in xs + ys):
                continue
            try:
                out[i, j] = pearson(xs, ys)
            except UndefinedCorrelationError:
                pass
    return out


def correlation_csv(records: Sequence[MetricsRecord], columns: Sequence[str] = CORRELATION_COLUMNS) -> str:
    matrix = correlation_matrix(records, columns)
    return _csv(["metric", *columns], ([name, *(float(v) for v in matrix[i])] for i, name in enumerate(columns)))


def pareto_rows(records: Sequence[MetricsRecord], cost: str) -> list[list[Any]]:
    """Frontier members of mean nDCG@5 against ``cost``, computed separately per (model, domain)."""
    groups: dict[tuple[str, str], list[MetricsRecord]] = defaultdict(list)
    for r in _sorted(records):
        groups[(r.config.model_id, r.config.domain)].append(r)
    rows = []
    for (model, domain), members in sorted(groups.items()):
        points = [(r.ndcg_mean, float(r.efficiency[cost]), r.config.strategy_id) for r in members]
        by_label = {r.config.strategy_id: r for r in members}
        for label in pareto_frontier(points):
            r = by_label[label]
            rows.append([model, domain, label, r.ndcg_mean, r.efficiency[cost]])
    return rows


def summary_json(records: Sequence[MetricsRecord], manifest: dict[str, Any] | None = None, *, deterministic: bool = False) -> str:
    entries = []
    for r in _sorted(records):
        row = record_row(r)
        if deterministic:
            row = {k: (None if k in VOLATILE_COLUMNS else v) for k, v in row.items()}
        row["ndcg_median"] = r.ndcg_median
        row["ndcg_variance"] = r.ndcg_variance
        row["per_query_ndcg"] = r.per_query_ndcg
        entries.append(row)
    data = {
        "records": entries,
        "n_records": len(entries),
        "degraded_judgments": sum(r.degraded_judgments for r in records),
    }
    if manifest is not None:
        data["run"] = {k: manifest[k] for k in ("models", "domains", "strategies", "judge_model", "tokenizer", "late_chunking_fallback", "index") if k in manifest}
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def write_report(
    records: Sequence[MetricsRecord],
    out_dir: str | Path,
    formats: Iterable[str] = ("csv", "json", "svg"),
    *,
    deterministic: bool = False,
    manifest: dict[str, Any] | None = None,
    failed: Sequence[dict[str, Any]] = (),
) -> list[Path]:
    """Write the requested report files into ``out_dir`` and return their paths."""
    if not records:
        raise AggregationError("no records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats = set(formats)
    unknown = formats - {"csv", "json", "svg"}
    if unknown:
        raise ValueError(f"unknown report formats: {sorted(unknown)}")
    written: list[Path] = []
    if "csv" in formats:
        written.append(_write(out / "results.csv", results_csv(records, deterministic=deterministic)))
        columns = [c for c in CORRELATION_COLUMNS if not (deterministic and c in VOLATILE_COLUMNS)]
        written.append(_write(out / "correlation.csv", correlation_csv(records, columns)))
        written.append(
            _write(out / "pareto.csv", _csv(["model", "domain", "strategy", "ndcg_mean", "index_bytes"], pareto_rows(records, "index_bytes")))
        )
        written.append(
            _write(
                out / "pareto_latency.csv",
                _csv(["model", "domain", "strategy", "ndcg_mean", "latency_p95_ms"], pareto_rows(records, "latency_p95_ms")),
            )
        )
    if "json" in formats:
        text = summary_json(records, manifest, deterministic=deterministic)
        if failed:
            data = json.loads(text)
            data["failed_cells"] = list(failed)
            text = json.dumps(data, indent=2, sort_keys=True) + "\n"
        written.append(_write(out / "summary.json", text))
    if "svg" in formats:
        written.extend(_write_figures(records, out / "figures", deterministic=deterministic))
    return written


def _write_figures(records: Sequence[MetricsRecord], fig_dir: Path, *, deterministic: bool = False) -> list[Path]:
    from . import plotting

    fig_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    groups: dict[tuple[str, str], list[MetricsRecord]] = defaultdict(list)
    for r in _sorted(records):
        groups[(r.config.model_id, r.config.domain)].append(r)
    for (model, domain), members in sorted(groups.items()):
        stem = f"{model}_{domain}".replace("/", "__")
        labels = [r.config.strategy_id for r in members]
        eff = [r.ndcg_mean for r in members]
        for cost, axis in (("index_bytes", "index size (bytes)"), ("latency_p95_ms", "p95 query latency (ms)")):
            points = [(r.ndcg_mean, float(r.efficiency[cost]), r.config.strategy_id) for r in members]
            paths.append(
                plotting.tradeoff_scatter(
                    fig_dir / f"tradeoff_{cost}_{stem}.svg",
                    labels,
                    eff,
                    [p[1] for p in points],
                    pareto_frontier(points),
                    cost_label=axis,
                    title=f"{model} / {domain}",
                )
            )
        paths.append(
            plotting.ndcg_boxplot(
                fig_dir / f"ndcg_{stem}.svg", labels, [r.per_query_ndcg for r in members], eff, title=f"{model} / {domain}"
            )
        )
    columns = [c for c in CORRELATION_COLUMNS if not (deterministic and c in VOLATILE_COLUMNS)]
    paths.append(plotting.correlation_heatmap(fig_dir / "correlation.svg", columns, correlation_matrix(records, columns)))
    return paths
