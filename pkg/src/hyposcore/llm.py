"""Chat-completion transport with retries, bounded batching and an offline fixture mock."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import httpx

logger = logging.getLogger(__name__)

API_KEY_ENV = "HYPOSCORE_API_KEY"
RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class LLMError(RuntimeError):
    pass


class AuthMissing(LLMError):
    pass


class TransportError(LLMError):
    """One failed attempt. ``retryable`` is false for errors a retry cannot fix."""

    def __init__(self, message: str, retryable: bool = True):
        super().__init__(message)
        self.retryable = retryable


class TransportExhausted(LLMError):
    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "https://api.openai.com/v1"
    model_name: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    backoff_initial: float = 1.0
    backoff_multiplier: float = 2.0
    max_parallel: int = 4

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def delay(self, retry: int) -> float:
        return self.backoff_initial * self.backoff_multiplier ** retry


class Transport(Protocol):
    def send(self, prompt: str, cfg: EndpointConfig) -> str: ...


class HttpTransport:
    """OpenAI-compatible ``POST {base_url}/chat/completions`` with a bearer key from the environment."""

    def __init__(self, api_key: str | None = None, client: httpx.Client | None = None):
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not self.api_key:
            raise AuthMissing(f"set {API_KEY_ENV} to call a chat-completion endpoint")
        self._client = client or httpx.Client()

    def send(self, prompt: str, cfg: EndpointConfig) -> str:
        body = {
            "model": cfg.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
        }
        try:
            resp = self._client.post(
                cfg.base_url.rstrip("/") + "/chat/completions",
                json=body,
                headers={"Authorization": f"Bearer {self.api_key}"},
                timeout=cfg.timeout,
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc
        if resp.status_code in RETRYABLE_STATUS:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}", retryable=False)
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion body: {exc}", retryable=False) from exc

    def close(self):
        self._client.close()


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class FixtureTransport:
    """Offline mock answering from a ``prompt_sha256 -> reply`` table."""

    def __init__(self, replies: dict[str, str]):
        self.replies = dict(replies)

    @classmethod
    def load(cls, path: str | Path) -> FixtureTransport:
        replies = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    replies[obj["prompt_sha256"]] = obj["reply"]
                except (ValueError, KeyError, TypeError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad fixture line ({exc})") from exc
        return cls(replies)

    def send(self, prompt: str, cfg: EndpointConfig) -> str:
        try:
            return self.replies[prompt_digest(prompt)]
        except KeyError:
            raise TransportError("no fixture for prompt", retryable=False) from None


def write_fixtures(pairs: Iterable[tuple[str, str]], path: str | Path) -> None:
    """Write ``(prompt, reply)`` pairs as a fixture file, sorted by digest."""
    rows = {prompt_digest(p): r for p, r in pairs}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for digest in sorted(rows):
            fh.write(json.dumps({"prompt_sha256": digest, "reply": rows[digest]}, ensure_ascii=False) + "\n")


def complete(
    prompt: str,
    cfg: EndpointConfig,
    transport: Transport,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Send one prompt, retrying retryable failures with exponential backoff.

    Makes at most ``cfg.max_retries + 1`` attempts.
    """
    attempts = 0
    while True:
        attempts += 1
        try:
            return transport.send(prompt, cfg)
        except TransportError as exc:
            if not exc.retryable or attempts > cfg.max_retries:
                raise TransportExhausted(f"gave up after {attempts} attempt(s): {exc}", attempts) from exc
            wait = cfg.delay(attempts - 1)
            logger.debug("attempt %d failed (%s); retrying in %.2fs", attempts, exc, wait)
            sleep(wait)


@dataclass(frozen=True)
class BatchResult:
    reply: str | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def complete_batch(
    prompts: Sequence[str],
    cfg: EndpointConfig,
    transport: Transport,
    sleep: Callable[[float], None] = time.sleep,
) -> list[BatchResult]:
    """Complete every prompt with at most ``cfg.max_parallel`` in flight; results keep input order."""
    if not prompts:
        return []

    def one(prompt: str) -> BatchResult:
        try:
            return BatchResult(reply=complete(prompt, cfg, transport, sleep))
        except LLMError as exc:
            return BatchResult(error=str(exc))

    with ThreadPoolExecutor(max_workers=cfg.max_parallel) as pool:
        return list(pool.map(one, prompts))


class InFlightCounter:
    """Wraps a transport and records the peak number of concurrent calls."""

    def __init__(self, inner: Transport):
        self.inner = inner
        self.current = 0
        self.peak = 0
        self._lock = threading.Lock()

    def send(self, prompt: str, cfg: EndpointConfig) -> str:
        with self._lock:
            self.current += 1
            self.peak = max(self.peak, self.current)
        try:
            return self.inner.send(prompt, cfg)
        finally:
            with self._lock:
                self.current -= 1
