from __future__ import annotations

import logging
import time
from typing import Any, Callable

import httpx

from .errors import ProviderError

logger = logging.getLogger(__name__)


def _retryable(exc: Exception) -> bool:
    if isinstance(exc, httpx.HTTPStatusError):
        code = exc.response.status_code
        return code == 429 or code >= 500
    return True


def post_json(
    client: httpx.Client,
    url: str,
    payload: dict[str, Any],
    *,
    headers: dict[str, str] | None = None,
    attempts: int = 3,
    backoff: float = 0.25,
    sleep: Callable[[float], None] = time.sleep,
    batch_index: int | None = None,
) -> Any:
    """POST ``payload`` and return the decoded JSON body, retrying with exponential backoff."""
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            response = client.post(url, json=payload, headers=headers)
            response.raise_for_status()
            return response.json()
        except (httpx.HTTPError, ValueError) as exc:
            last = exc
            if not _retryable(exc) or attempt == attempts - 1:
                break
            delay = backoff * (2**attempt)
            logger.warning("POST %s failed (%s), retrying in %.2fs", url, exc, delay)
            sleep(delay)
    raise ProviderError(f"POST {url} failed: {last}", batch_index=batch_index) from last


def auth_headers(api_key: str | None) -> dict[str, str]:
    return {"Authorization": f"Bearer {api_key}"} if api_key else {}
