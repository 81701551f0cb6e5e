"""Pluggable completion backends: HTTP chat endpoints and deterministic mocks.

``complete`` sends one prompt and returns the backend's text. The HTTP
backend posts a single user message in the common chat-completion shape,
retries transient failures (timeouts, 429, 5xx) with exponential backoff,
and honors an optional requests-per-second cap. Responses can be cached on
disk keyed by (model name, prompt text) so identical re-runs make no network
calls. Credentials come from an environment variable and are never written
to logs or artifacts.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import requests

from .errors import BackendError, ConfigError, PromptError
from .prompts import FilledPrompt

BACKEND_KINDS = ("http_chat", "mock_echo", "mock_fixture")
DEFAULT_API_KEY_ENV = "LAYOUTQA_API_KEY"


@dataclass(frozen=True)
class BackendSpec:
    """Configuration for one completion backend."""

    kind: str
    endpoint: str | None = None
    model_name: str | None = None
    max_output_tokens: int = 256
    temperature: float = 0.0
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout_s: float = 60.0
    max_attempts: int = 4
    backoff_base_s: float = 0.5
    backoff_cap_s: float = 30.0
    max_requests_per_second: float | None = None
    parallelism: int = 4
    cache_dir: str | None = None
    fixtures: Mapping[str, str] | None = None

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"unknown backend kind {self.kind!r}; expected one of {BACKEND_KINDS}")
        if self.kind == "http_chat" and not self.endpoint:
            raise ConfigError("http_chat backend requires an endpoint")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def to_dict(self) -> dict:
        """Serializable form; holds the credential *variable name*, never its value."""
        out = {
            "kind": self.kind,
            "endpoint": self.endpoint,
            "model_name": self.model_name,
            "max_output_tokens": self.max_output_tokens,
            "temperature": self.temperature,
            "api_key_env": self.api_key_env,
            "timeout_s": self.timeout_s,
            "max_attempts": self.max_attempts,
            "backoff_base_s": self.backoff_base_s,
            "backoff_cap_s": self.backoff_cap_s,
            "max_requests_per_second": self.max_requests_per_second,
            "parallelism": self.parallelism,
            "cache_dir": self.cache_dir,
        }
        if self.fixtures is not None:
            out["fixtures"] = dict(self.fixtures)
        return out


@dataclass(frozen=True)
class Completion:
    """One backend response. Empty text is recorded as-is, never erased."""

    text: str
    latency_ms: float
    attempt_count: int = 1


@dataclass(frozen=True)
class BatchItem:
    """Positional result of a batch call: a completion or an error message."""

    completion: Completion | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.completion is not None


def prompt_hash(backend: BackendSpec, prompt_text: str) -> str:
    key = f"{backend.model_name or ''}\x00{prompt_text}"
    return hashlib.sha256(key.encode("utf-8")).hexdigest()


def complete(backend: BackendSpec, prompt: FilledPrompt) -> Completion:
    """Run one prompt through the backend, consulting the cache first."""
    if not prompt.text:
        raise PromptError("prompt text is empty")
    cached = _cache_get(backend, prompt.text)
    if cached is not None:
        return cached
    completion = _dispatch(backend, prompt)
    _cache_put(backend, prompt.text, completion)
    return completion


def complete_batch(
    backend: BackendSpec,
    prompts: Sequence[FilledPrompt],
    parallelism: int | None = None,
) -> list[BatchItem]:
    """Run prompts with bounded parallelism; results align with the input order.

    A failing item becomes an error entry instead of aborting the batch.
    """
    if not prompts:
        return []
    workers = parallelism or backend.parallelism
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(complete, backend, p) for p in prompts]
        results: list[BatchItem] = []
        for future in futures:
            try:
                results.append(BatchItem(completion=future.result()))
            except Exception as exc:  # per-item capture is the contract
                results.append(BatchItem(error=f"{type(exc).__name__}: {exc}"))
    return results


# --- dispatch ---

def _dispatch(backend: BackendSpec, prompt: FilledPrompt) -> Completion:
    start = time.perf_counter()
    if backend.kind == "mock_echo":
        text = prompt.text.splitlines()[-1]
        return Completion(text=text, latency_ms=_ms_since(start))
    if backend.kind == "mock_fixture":
        if backend.fixtures is None:
            raise ConfigError("mock_fixture backend requires fixtures")
        if prompt.question_id not in backend.fixtures:
            raise BackendError(f"no fixture answer for question id {prompt.question_id!r}")
        return Completion(text=backend.fixtures[prompt.question_id], latency_ms=_ms_since(start))
    return _http_chat(backend, prompt)


def _http_chat(backend: BackendSpec, prompt: FilledPrompt) -> Completion:
    api_key = os.environ.get(backend.api_key_env)
    if not api_key:
        raise ConfigError(
            f"credential env var {backend.api_key_env} is not set; required for http_chat"
        )
    payload = {
        "model": backend.model_name,
        "messages": [{"role": "user", "content": prompt.text}],
        "temperature": backend.temperature,
        "max_tokens": backend.max_output_tokens,
    }
    headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
    limiter = _limiter_for(backend)
    start = time.perf_counter()
    last_status: int | None = None
    last_reason = "no attempt made"
    for attempt in range(1, backend.max_attempts + 1):
        if limiter is not None:
            limiter.acquire()
        try:
            response = requests.post(
                backend.endpoint, json=payload, headers=headers, timeout=backend.timeout_s
            )
        except (requests.Timeout, requests.ConnectionError) as exc:
            last_status, last_reason = None, f"{type(exc).__name__}: {exc}"
        else:
            if response.status_code == 200:
                text = _extract_chat_text(response)
                return Completion(text=text, latency_ms=_ms_since(start), attempt_count=attempt)
            last_status, last_reason = response.status_code, f"HTTP {response.status_code}"
            if response.status_code != 429 and response.status_code < 500:
                raise BackendError(
                    f"backend rejected the request: {last_reason}", status=last_status
                )
        if attempt < backend.max_attempts:
            delay = min(backend.backoff_cap_s, backend.backoff_base_s * 2 ** (attempt - 1))
            time.sleep(delay)
    raise BackendError(
        f"backend failed after {backend.max_attempts} attempts; last error: {last_reason}",
        status=last_status,
    )


def _extract_chat_text(response: requests.Response) -> str:
    try:
        body = response.json()
        return body["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise BackendError(f"unexpected response shape: {exc}", status=response.status_code) from exc


def _ms_since(start: float) -> float:
    return (time.perf_counter() - start) * 1000.0


# --- rate limiting ---

class _RateLimiter:
    """Spaces calls at least 1/rps apart; safe for concurrent acquire()."""

    def __init__(self, rps: float):
        self._interval = 1.0 / rps
        self._lock = threading.Lock()
        self._next = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            wait = self._next - now
            self._next = max(now, self._next) + self._interval
        if wait > 0:
            time.sleep(wait)


_limiters: dict[tuple[str, float], _RateLimiter] = {}
_limiters_lock = threading.Lock()


def _limiter_for(backend: BackendSpec) -> _RateLimiter | None:
    if backend.max_requests_per_second is None:
        return None
    key = (backend.endpoint or "", backend.max_requests_per_second)
    with _limiters_lock:
        if key not in _limiters:
            _limiters[key] = _RateLimiter(backend.max_requests_per_second)
        return _limiters[key]


# --- disk cache ---

_cache_lock = threading.Lock()


def _cache_path(backend: BackendSpec, prompt_text: str) -> Path | None:
    if not backend.cache_dir:
        return None
    return Path(backend.cache_dir) / f"{prompt_hash(backend, prompt_text)}.json"


def _cache_get(backend: BackendSpec, prompt_text: str) -> Completion | None:
    path = _cache_path(backend, prompt_text)
    if path is None or not path.exists():
        return None
    with _cache_lock:
        data = json.loads(path.read_text(encoding="utf-8"))
    return Completion(
        text=data["text"],
        latency_ms=data.get("latency_ms", 0.0),
        attempt_count=data.get("attempts", 1),
    )


def _cache_put(backend: BackendSpec, prompt_text: str, completion: Completion) -> None:
    path = _cache_path(backend, prompt_text)
    if path is None:
        return
    record = {
        "text": completion.text,
        "latency_ms": completion.latency_ms,
        "attempts": completion.attempt_count,
    }
    with _cache_lock:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(record, ensure_ascii=False), encoding="utf-8")
        tmp.replace(path)
