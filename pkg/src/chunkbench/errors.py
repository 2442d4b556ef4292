"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ChunkbenchError(Exception):
    """Base class for all errors raised by chunkbench."""


class CorpusError(ChunkbenchError, ValueError):
    """A corpus file could not be parsed or failed validation."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None) -> None:
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}: " if where else f"line {line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


class ParseError(CorpusError):
    pass


class ValidationError(CorpusError):
    pass


class ConfigError(ChunkbenchError, ValueError):
    """Invalid strategy registry or run configuration."""


class ContractError(ChunkbenchError, ValueError):
    """A value violated an interface contract (dimension mismatch, zero vector, ...)."""


class ProviderError(ChunkbenchError):
    """A remote embedding or chat provider failed after retries."""

    def __init__(self, message: str, *, batch_index: int | None = None) -> None:
        self.batch_index = batch_index
        if batch_index is not None:
            message = f"batch {batch_index}: {message}"
        super().__init__(message)


class AggregationError(ChunkbenchError, ValueError):
    pass


class UndefinedCorrelationError(ChunkbenchError, ValueError):
    """Pearson correlation requested for a constant series."""
