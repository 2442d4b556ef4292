"""Loading, validating and partitioning documents and queries.

Documents and queries live in JSON-lines files. Golden answers are kept on
:class:`Query` for the judge only; everything upstream of judging works with
the :class:`RetrievalQuery` projection, which has no answer field at all.
"""

from __future__ import annotations

import json
import logging
import unicodedata
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence, TypeVar

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

_DOC_ADAPTER_KEYS = {
    "id": ("id", "_id", "context_id"),
    "domain": ("domain", "label"),
    "text": ("context", "text"),
}
_QUERY_ADAPTER_KEYS = {
    "id": ("id", "_id"),
    "domain": ("domain", "label"),
    "query": ("input", "query"),
}


@dataclass(frozen=True)
class Document:
    id: str
    domain: str
    text: str


@dataclass(frozen=True)
class RetrievalQuery:
    """The part of a query that chunking, indexing and retrieval may see."""

    id: str
    domain: str
    text: str


@dataclass(frozen=True)
class Query:
    id: str
    domain: str
    text: str
    golden_answer: str

    def for_retrieval(self) -> RetrievalQuery:
        return RetrievalQuery(id=self.id, domain=self.domain, text=self.text)


def _nfc(value: str) -> str:
    return unicodedata.normalize("NFC", value)


def _iter_json_lines(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", path=str(path), line=lineno) from exc
            if not isinstance(record, dict):
                raise ParseError("expected a JSON object", path=str(path), line=lineno)
            yield lineno, record


def _pick(record: dict[str, Any], keys: Sequence[str]) -> Any:
    for key in keys:
        if key in record:
            return record[key]
    return None


def _require_str(value: Any, field: str, path: Path, lineno: int) -> str:
    if value is None:
        raise ValidationError(f"missing field {field!r}", path=str(path), line=lineno)
    if not isinstance(value, (str, int)) or isinstance(value, bool):
        raise ValidationError(f"field {field!r} must be a string", path=str(path), line=lineno)
    value = _nfc(str(value))
    if not value.strip():
        raise ValidationError(f"field {field!r} is empty", path=str(path), line=lineno)
    return value


def load_documents(path: str | Path, *, ultradomain_adapter: bool = False) -> list[Document]:
    """Read documents in file order; ids must be unique."""
    path = Path(path)
    docs: list[Document] = []
    seen: dict[str, int] = {}
    for lineno, record in _iter_json_lines(path):
        if ultradomain_adapter:
            fields = {k: _pick(record, keys) for k, keys in _DOC_ADAPTER_KEYS.items()}
        else:
            fields = {k: record.get(k) for k in ("id", "domain", "text")}
        doc = Document(
            id=_require_str(fields["id"], "id", path, lineno),
            domain=_require_str(fields["domain"], "domain", path, lineno),
            text=_require_str(fields["text"], "text", path, lineno),
        )
        if doc.id in seen:
            raise ValidationError(
                f"duplicate document id {doc.id!r} (first seen on line {seen[doc.id]})",
                path=str(path),
                line=lineno,
            )
        seen[doc.id] = lineno
        docs.append(doc)
    return docs


def load_queries(
    path: str | Path,
    *,
    ultradomain_adapter: bool = False,
    domains: Iterable[str] | None = None,
) -> list[Query]:
    """Read queries; when ``domains`` is given every query must belong to one of them."""
    path = Path(path)
    known = set(domains) if domains is not None else None
    queries: list[Query] = []
    seen: dict[str, int] = {}
    for lineno, record in _iter_json_lines(path):
        if ultradomain_adapter:
            fields = {k: _pick(record, keys) for k, keys in _QUERY_ADAPTER_KEYS.items()}
            answers = record.get("answers", record.get("answer"))
            if isinstance(answers, list):
                if len(answers) > 1:
                    logger.info("%s:%d: %d answers present, using the first", path, lineno, len(answers))
                answers = answers[0] if answers else None
            fields["answer"] = answers
        else:
            fields = {k: record.get(k) for k in ("id", "domain", "query", "answer")}
        query = Query(
            id=_require_str(fields["id"], "id", path, lineno),
            domain=_require_str(fields["domain"], "domain", path, lineno),
            text=_require_str(fields["query"], "query", path, lineno),
            golden_answer=_require_str(fields["answer"], "answer", path, lineno),
        )
        if query.id in seen:
            raise ValidationError(f"duplicate query id {query.id!r}", path=str(path), line=lineno)
        if known is not None and query.domain not in known:
            raise ValidationError(
                f"query domain {query.domain!r} has no loaded documents", path=str(path), line=lineno
            )
        seen[query.id] = lineno
        queries.append(query)
    return queries


def dump_documents(path: str | Path, docs: Iterable[Document]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"id": doc.id, "domain": doc.domain, "text": doc.text}, ensure_ascii=False))
            fh.write("\n")


def dump_queries(path: str | Path, queries: Iterable[Query]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for q in queries:
            record = {"id": q.id, "domain": q.domain, "query": q.text, "answer": q.golden_answer}
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")


T = TypeVar("T", Document, Query, RetrievalQuery)


def partition_by_domain(items: Iterable[T]) -> dict[str, list[T]]:
    """Group items by domain, preserving input order within each group."""
    groups: dict[str, list[T]] = defaultdict(list)
    for item in items:
        groups[item.domain].append(item)
    return dict(groups)
