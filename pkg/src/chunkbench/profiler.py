"""Wall time, peak memory and query-latency measurements."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence, TypeVar

from .embedding import Vector
from .errors import ContractError
from .metrics import percentile
from .vectorstore import VectorIndex

logger = logging.getLogger(__name__)

T = TypeVar("T")

SAMPLE_INTERVAL_S = 0.01
WARMUP_QUERIES = 3
MB = 1024 * 1024


@dataclass
class EfficiencyReport:
    chunk_time_s: float
    peak_ram_mb: float
    chunk_count: int
    index_bytes: int
    latency_samples_ms: list[float] = field(default_factory=list)

    @property
    def latency_p50_ms(self) -> float:
        return percentile(self.latency_samples_ms, 50) if self.latency_samples_ms else 0.0

    @property
    def latency_p95_ms(self) -> float:
        return percentile(self.latency_samples_ms, 95) if self.latency_samples_ms else 0.0

    def to_json(self) -> dict:
        return {
            "chunk_time_s": self.chunk_time_s,
            "peak_ram_mb": self.peak_ram_mb,
            "chunk_count": self.chunk_count,
            "index_bytes": self.index_bytes,
            "latency_samples_ms": list(self.latency_samples_ms),
            "latency_p50_ms": self.latency_p50_ms,
            "latency_p95_ms": self.latency_p95_ms,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EfficiencyReport":
        return cls(
            data["chunk_time_s"],
            data["peak_ram_mb"],
            data["chunk_count"],
            data["index_bytes"],
            list(data.get("latency_samples_ms", [])),
        )


def time_section(action: Callable[[], T]) -> tuple[T, float]:
    """Run ``action`` and return its result with the elapsed monotonic time in seconds."""
    start = time.perf_counter()
    result = action()
    return result, time.perf_counter() - start


def _rss_reader() -> Callable[[], int] | None:
    try:
        import psutil

        proc = psutil.Process()
        proc.memory_info()
    except Exception:  # psutil missing or RSS not readable on this platform
        return None
    return lambda: proc.memory_info().rss


class _PeakSampler(threading.Thread):
    def __init__(self, read: Callable[[], int], interval: float) -> None:
        super().__init__(daemon=True)
        self.read = read
        self.interval = interval
        self.peak = read()
        self._stop_event = threading.Event()

    def run(self) -> None:
        while not self._stop_event.wait(self.interval):
            self.peak = max(self.peak, self.read())

    def stop(self) -> int:
        self._stop_event.set()
        self.join()
        self.peak = max(self.peak, self.read())
        return self.peak


def measure(action: Callable[[], T], *, interval: float = SAMPLE_INTERVAL_S) -> tuple[T, float, float]:
    """Run ``action`` once, returning ``(result, elapsed_s, peak_rss_delta_mb)``.

    Peak memory is the largest RSS seen by a background sampler minus the RSS
    just before the action, floored at 0. It is -1 when RSS cannot be read.
    """
    read = _rss_reader()
    if read is None:
        logger.warning("process RSS is not readable here; peak memory reported as -1")
        result, elapsed = time_section(action)
        return result, elapsed, -1.0
    baseline = read()
    sampler = _PeakSampler(read, interval)
    sampler.start()
    try:
        result, elapsed = time_section(action)
    finally:
        peak = sampler.stop()
    return result, elapsed, max(0, peak - baseline) / MB


def sample_peak_rss(action: Callable[[], object], *, interval: float = SAMPLE_INTERVAL_S) -> float:
    return measure(action, interval=interval)[2]


def latency_trial(
    index: VectorIndex, queries: Sequence[Vector], k: int = 5, *, warmup: int = WARMUP_QUERIES
) -> list[float]:
    """Per-query ``top_k`` wall time in milliseconds, after ``warmup`` untimed queries."""
    if not len(index):
        raise ContractError("latency trial on an empty index")
    if not queries:
        raise ContractError("latency trial needs at least one query")
    for i in range(warmup):
        index.top_k(queries[i % len(queries)], k)
    samples = []
    for q in queries:
        start = time.perf_counter()
        index.top_k(q, k)
        samples.append((time.perf_counter() - start) * 1000.0)
    return samples
