"""Chat-completion providers used by the LLM chunkers and the relevance judge."""

from __future__ import annotations

import json
import os
import re
import threading
import time
from abc import ABC, abstractmethod
from typing import Callable, Iterable

import httpx

from ._http import auth_headers, post_json
from .errors import ProviderError

DEFAULT_JUDGE_MODEL = "mistralai/mixtral-8x22b-instruct-v0.1"


class ChatProvider(ABC):
    model: str

    @abstractmethod
    def complete(self, prompt: str) -> str:
        """Send one user message and return the assistant's text."""


class HttpChatProvider(ChatProvider):
    """Client for an OpenAI-compatible ``/chat/completions`` endpoint."""

    def __init__(
        self,
        model: str | None = None,
        *,
        base_url: str | None = None,
        api_key: str | None = None,
        temperature: float = 0.0,
        top_p: float = 0.1,
        attempts: int = 3,
        backoff: float = 0.25,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
        timeout: float = 120.0,
        env_prefix: str = "JUDGE",
    ) -> None:
        base_url = base_url or os.environ.get(f"{env_prefix}_API_BASE")
        if not base_url:
            raise ProviderError(f"no chat endpoint configured (set {env_prefix}_API_BASE)")
        self.model = model or os.environ.get(f"{env_prefix}_MODEL") or DEFAULT_JUDGE_MODEL
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(f"{env_prefix}_API_KEY")
        self.temperature = temperature
        self.top_p = top_p
        self.attempts = attempts
        self.backoff = backoff
        self._sleep = sleep
        self._client = client or httpx.Client(timeout=timeout)

    def payload(self, prompt: str) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "top_p": self.top_p,
        }

    def complete(self, prompt: str) -> str:
        body = post_json(
            self._client,
            f"{self.base_url}/chat/completions",
            self.payload(prompt),
            headers=auth_headers(self.api_key),
            attempts=self.attempts,
            backoff=self.backoff,
            sleep=self._sleep,
        )
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed chat response: {exc}") from exc


class ScriptedChatProvider(ChatProvider):
    """Test double that answers from a list of canned replies or a function of the prompt.

    Every prompt received is recorded in :attr:`prompts`.
    """

    def __init__(self, script: Iterable[str] | Callable[[str], str], model: str = "scripted") -> None:
        self.model = model
        self._fn = script if callable(script) else None
        self._replies = None if callable(script) else list(script)
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.prompts.append(prompt)
            if self._fn is not None:
                return self._fn(prompt)
            if not self._replies:
                raise ProviderError("scripted provider ran out of replies")
            if len(self._replies) == 1:
                return self._replies[0]
            return self._replies.pop(0)


def extract_json_object(text: str) -> dict:
    """Parse the first JSON object in ``text``, tolerating markdown code fences."""
    fence = re.search(r"```(?:json)?\s*(.*?)```", text, re.DOTALL)
    if fence:
        text = fence.group(1)
    text = text.strip()
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        start, end = text.find("{"), text.rfind("}")
        if start < 0 or end <= start:
            raise
        value = json.loads(text[start : end + 1])
    if not isinstance(value, dict):
        raise ValueError("expected a JSON object")
    return value
