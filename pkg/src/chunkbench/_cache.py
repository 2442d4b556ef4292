from __future__ import annotations

import threading
from concurrent.futures import Future
from typing import Generic, Hashable, Iterable, TypeVar

K = TypeVar("K", bound=Hashable)
V = TypeVar("V")


class SingleFlightCache(Generic[K, V]):
    """Thread-safe key/value cache that lets exactly one caller compute a missing key.

    Callers ``claim`` a set of keys and receive the values already known,
    futures for keys somebody else is computing, and the keys they now own.
    Owned keys must be settled with :meth:`resolve` or :meth:`fail`.
    Subclasses may override ``_load``/``_store`` to add persistence.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._values: dict[K, V] = {}
        self._pending: dict[K, Future] = {}

    def _load(self, key: K) -> V | None:
        return None

    def _store(self, key: K, value: V) -> None:
        pass

    def __len__(self) -> int:
        with self._lock:
            return len(self._values)

    def get(self, key: K) -> V | None:
        with self._lock:
            if key in self._values:
                return self._values[key]
        value = self._load(key)
        if value is not None:
            with self._lock:
                self._values.setdefault(key, value)
        return value

    def claim(self, keys: Iterable[K]) -> tuple[dict[K, V], dict[K, Future], list[K]]:
        found: dict[K, V] = {}
        waiting: dict[K, Future] = {}
        mine: list[K] = []
        for key in dict.fromkeys(keys):
            value = self.get(key)
            with self._lock:
                if value is None and key in self._values:
                    value = self._values[key]
                if value is not None:
                    found[key] = value
                elif key in self._pending:
                    waiting[key] = self._pending[key]
                else:
                    self._pending[key] = Future()
                    mine.append(key)
        return found, waiting, mine

    def resolve(self, key: K, value: V) -> None:
        self._store(key, value)
        with self._lock:
            self._values[key] = value
            future = self._pending.pop(key, None)
        if future is not None:
            future.set_result(value)

    def fail(self, key: K, exc: BaseException) -> None:
        with self._lock:
            future = self._pending.pop(key, None)
        if future is not None:
            future.set_exception(exc)
