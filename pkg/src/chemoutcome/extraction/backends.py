"""LLM backends. Each exposes ``complete(prompt) -> str``."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from typing import Callable, Protocol, Sequence

import httpx

from ..errors import BackendError
from . import rules

log = logging.getLogger(__name__)

CHUNK_BLOCK = re.compile(r"<<CHUNK id=(?P<id>\S+) rank=\d+>>\n(?P<text>.*?)\n<<END CHUNK>>", re.S)
SCHEMA_LINE = re.compile(r"^schema_id: (\S+)$", re.M)


class LLMBackend(Protocol):
    name: str
    context_limit: int

    def complete(self, prompt: str) -> str: ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class HttpChatBackend:
    """OpenAI-compatible chat-completion client.

    Timeouts, transport errors, 429 and 5xx are retried with exponential
    backoff; other 4xx responses fail immediately.
    """

    name = "http"

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        temperature: float = 0.0,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff: float = 1.0,
        max_in_flight: int = 4,
        context_limit: int = 8192,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get("CHEMOUTCOME_LLM_API_KEY")
        self.temperature = temperature
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.context_limit = context_limit
        self._sleep = sleep
        self._sem = threading.BoundedSemaphore(max_in_flight)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                with self._sem:
                    resp = self._client.post(self.endpoint, json=payload, headers=headers)
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = BackendError(f"HTTP {resp.status_code} from {self.endpoint}")
                elif resp.status_code >= 400:
                    raise BackendError(
                        f"HTTP {resp.status_code} from {self.endpoint}: {resp.text[:200]}",
                        attempts=attempt,
                        retryable=False,
                    )
                else:
                    try:
                        return resp.json()["choices"][0]["message"]["content"]
                    except (KeyError, IndexError, TypeError, ValueError) as exc:
                        last = BackendError(f"malformed completion response: {exc}")
            except httpx.TransportError as exc:
                last = exc
            log.debug("attempt %d/%d failed: %s", attempt, self.max_attempts, last)
            if attempt < self.max_attempts:
                self._sleep(self.backoff * 2 ** (attempt - 1))
        raise BackendError(
            f"{self.endpoint} failed after {self.max_attempts} attempts: {last}", attempts=self.max_attempts
        )


class MockBackend:
    """Replays canned responses keyed by the SHA-256 of the prompt."""

    name = "mock"

    def __init__(self, responses: dict[str, str] | None = None, context_limit: int = 8192):
        self.responses = dict(responses or {})
        self.context_limit = context_limit
        self.calls = 0

    def register(self, prompt: str, response: str) -> None:
        self.responses[prompt_hash(prompt)] = response

    def complete(self, prompt: str) -> str:
        self.calls += 1
        try:
            return self.responses[prompt_hash(prompt)]
        except KeyError:
            raise BackendError("no canned response for prompt", retryable=False) from None


class ScriptedBackend:
    """Returns a fixed sequence of responses, one per call.

    When the script runs out the last response repeats.
    """

    name = "scripted"

    def __init__(self, responses: Sequence[str], context_limit: int = 8192):
        if not responses:
            raise ValueError("need at least one scripted response")
        self.responses = list(responses)
        self.context_limit = context_limit
        self.prompts: list[str] = []
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def complete(self, prompt: str) -> str:
        with self._lock:
            i = min(len(self.prompts), len(self.responses) - 1)
            self.prompts.append(prompt)
        return self.responses[i]


def prompt_chunks(prompt: str) -> list[str]:
    return [m.group("text") for m in CHUNK_BLOCK.finditer(prompt)]


class RuleBackend:
    """Answers from the prompt's chunk blocks with the regex rule tables.

    Only text inside chunk blocks is read, never exemplars, so the output is
    always supported by the retrieved note text.
    """

    name = "rule"

    def __init__(self, context_limit: int = 1_000_000):
        self.context_limit = context_limit

    def complete(self, prompt: str) -> str:
        m = SCHEMA_LINE.search(prompt)
        if not m:
            raise BackendError("prompt carries no schema_id line", retryable=False)
        texts = prompt_chunks(prompt)
        if m.group(1).startswith("phenotype"):
            rec = rules.extract_phenotype(texts)
        elif m.group(1).startswith("outcome"):
            rec = rules.extract_outcome(texts)
        else:
            raise BackendError(f"rule backend has no rules for {m.group(1)}", retryable=False)
        return json.dumps(rec.to_dict())
