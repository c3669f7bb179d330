"""Chat-completion client with retries, plus a deterministic mock backend."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import httpx

from .errors import AuthError, BackendError, ContentFiltered, RateLimited, ServerError
from .prompt import PromptBundle, prompt_hash

log = logging.getLogger(__name__)

API_KEY_ENV = "PHISHCHECK_API_KEY"
RETRY_STATUSES = frozenset({408, 429, 500, 502, 503, 504})


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str
    model_name: str = "default"
    api_key: str | None = field(default=None, repr=False)
    temperature: float | None = None
    top_p: float | None = None
    max_retries: int = 3
    retry_backoff: tuple[float, ...] = (1.0, 2.0, 4.0)
    request_timeout: float = 120.0
    max_concurrency: int = 4
    # "Authorization" sends a bearer token, anything else sends the raw key
    api_key_header: str = "Authorization"

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.request_timeout <= 0:
            raise ValueError("request_timeout must be > 0")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if any(d < 0 for d in self.retry_backoff):
            raise ValueError("backoff delays must be >= 0")

    @classmethod
    def from_env(cls, endpoint: str, **kwargs) -> "BackendConfig":
        return cls(endpoint=endpoint, api_key=os.environ.get(API_KEY_ENV), **kwargs)

    def backoff(self, retry_index: int) -> float:
        if not self.retry_backoff:
            return 0.0
        return self.retry_backoff[min(retry_index, len(self.retry_backoff) - 1)]


@dataclass(frozen=True)
class RawResponse:
    text: str
    model_name: str
    latency: float
    attempt: int
    finish_reason: str | None = None


def build_request_body(prompt_text: str, config: BackendConfig) -> dict[str, Any]:
    body: dict[str, Any] = {
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt_text}],
    }
    # sampling parameters are sent only when overridden
    if config.temperature is not None:
        body["temperature"] = config.temperature
    if config.top_p is not None:
        body["top_p"] = config.top_p
    return body


def _is_content_filter(payload: Any) -> bool:
    if not isinstance(payload, dict):
        return False
    err = payload.get("error")
    if not isinstance(err, dict):
        return False
    codes = [str(err.get("code", ""))]
    inner = err.get("innererror")
    if isinstance(inner, dict):
        codes.append(str(inner.get("code", "")))
    return any(c in ("content_filter", "ResponsibleAIPolicyViolation") for c in codes)


def _json_or_none(resp: httpx.Response) -> Any:
    try:
        return resp.json()
    except ValueError:
        return None


class ChatClient:
    """Sends one-message prompts to a chat-completion endpoint.

    Shareable across threads; at most ``config.max_concurrency`` requests
    are in flight at once.
    """

    def __init__(
        self,
        config: BackendConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._sleep = sleep
        headers = {"Content-Type": "application/json"}
        if config.api_key:
            if config.api_key_header.lower() == "authorization":
                headers["Authorization"] = f"Bearer {config.api_key}"
            else:
                headers[config.api_key_header] = config.api_key
        self._http = httpx.Client(transport=transport, headers=headers, timeout=config.request_timeout)
        self._slots = threading.BoundedSemaphore(config.max_concurrency)

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def complete(self, prompt: PromptBundle | str) -> RawResponse:
        text = prompt.text if isinstance(prompt, PromptBundle) else prompt
        body = json.dumps(build_request_body(text, self.config), ensure_ascii=False).encode("utf-8")
        cfg = self.config
        last_error: BackendError | None = None
        with self._slots:
            for attempt in range(1, cfg.max_retries + 2):
                if attempt > 1:
                    self._sleep(cfg.backoff(attempt - 2))
                started = time.monotonic()
                try:
                    resp = self._http.post(cfg.endpoint, content=body)
                except httpx.TimeoutException as exc:
                    last_error = ServerError(f"request timed out: {exc}", attempts=attempt)
                    log.info("attempt %d timed out", attempt)
                    continue
                except httpx.TransportError as exc:
                    last_error = ServerError(f"transport error: {exc}", attempts=attempt)
                    log.info("attempt %d failed: %s", attempt, type(exc).__name__)
                    continue
                latency = time.monotonic() - started
                status = resp.status_code
                payload = _json_or_none(resp)
                if status in (401, 403):
                    raise AuthError(f"backend rejected credentials (HTTP {status})", attempts=attempt, status=status)
                if _is_content_filter(payload):
                    raise ContentFiltered("backend content filter refused the prompt", attempts=attempt, status=status)
                if status == 429:
                    last_error = RateLimited("rate limited", attempts=attempt, status=status)
                    log.info("attempt %d rate limited", attempt)
                    continue
                if status in RETRY_STATUSES:
                    last_error = ServerError(f"backend returned HTTP {status}", attempts=attempt, status=status)
                    log.info("attempt %d got HTTP %d", attempt, status)
                    continue
                if status != 200:
                    raise BackendError(f"backend returned HTTP {status}", attempts=attempt, status=status)
                return self._extract(payload, latency, attempt)
        assert last_error is not None
        raise last_error

    def _extract(self, payload: Any, latency: float, attempt: int) -> RawResponse:
        try:
            choice = payload["choices"][0]
            finish = choice.get("finish_reason")
            content = choice.get("message", {}).get("content")
        except (TypeError, KeyError, IndexError, AttributeError):
            raise BackendError("response lacks choices[0].message", attempts=attempt, status=200) from None
        if finish == "content_filter":
            raise ContentFiltered("response withheld by content filter", attempts=attempt, status=200)
        if not isinstance(content, str):
            raise BackendError("response message has no text content", attempts=attempt, status=200)
        model = payload.get("model") or self.config.model_name
        return RawResponse(text=content, model_name=model, latency=latency, attempt=attempt, finish_reason=finish)


# -- mock backend --------------------------------------------------------------


@dataclass
class MockEntry:
    """Scripted behavior for one prompt.

    ``fail_first`` statuses are returned on the first requests, then
    ``text``.  A non-200 ``status`` fails every request.
    """

    text: str = ""
    fail_first: list[int] = field(default_factory=list)
    status: int = 200
    content_filter: bool = False
    finish_reason: str = "stop"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MockEntry":
        return cls(
            text=data.get("text", ""),
            fail_first=list(data.get("fail_first", [])),
            status=int(data.get("status", 200)),
            content_filter=bool(data.get("content_filter", False)),
            finish_reason=data.get("finish_reason", "stop"),
        )


def _chat_payload(text: str, model: str, finish_reason: str) -> dict[str, Any]:
    return {
        "id": "mock",
        "object": "chat.completion",
        "model": model,
        "choices": [{"index": 0, "finish_reason": finish_reason, "message": {"role": "assistant", "content": text}}],
    }


class MockBackend(httpx.BaseTransport):
    """Serves canned completions keyed by the SHA-256 of the prompt text."""

    def __init__(self, entries: dict[str, MockEntry] | None = None, default: MockEntry | None = None):
        self.entries = dict(entries or {})
        self.default = default
        self.requests: list[dict[str, Any]] = []
        self._calls: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_dir(cls, directory: str | os.PathLike) -> "MockBackend":
        """Load ``<sha256>.json`` fixtures and an optional ``default.json``."""
        directory = Path(directory)
        if not directory.is_dir():
            raise FileNotFoundError(f"mock fixture directory not found: {directory}")
        entries = {}
        default = None
        for path in sorted(directory.glob("*.json")):
            data = json.loads(path.read_text(encoding="utf-8"))
            entry = MockEntry.from_dict(data)
            if path.stem == "default":
                default = entry
            else:
                entries[data.get("prompt_sha256", path.stem)] = entry
        return cls(entries, default)

    def add(self, prompt_text: str, entry: MockEntry) -> str:
        key = prompt_hash(prompt_text)
        self.entries[key] = entry
        return key

    def calls(self, key: str | None = None) -> int:
        with self._lock:
            if key is None:
                return sum(self._calls.values())
            return self._calls.get(key, 0)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        body = json.loads(request.read())
        prompt_text = body["messages"][-1]["content"]
        key = prompt_hash(prompt_text)
        with self._lock:
            self.requests.append(body)
            n = self._calls.get(key, 0)
            self._calls[key] = n + 1
        entry = self.entries.get(key, self.default)
        if entry is None:
            return httpx.Response(404, json={"error": {"code": "mock_missing", "message": f"no fixture for {key}"}})
        if entry.content_filter:
            return httpx.Response(400, json={"error": {"code": "content_filter", "message": "filtered"}})
        if n < len(entry.fail_first):
            status = entry.fail_first[n]
            return httpx.Response(status, json={"error": {"code": str(status), "message": "scripted failure"}})
        if entry.status != 200:
            return httpx.Response(entry.status, json={"error": {"code": str(entry.status), "message": "scripted failure"}})
        return httpx.Response(200, json=_chat_payload(entry.text, body.get("model", "mock"), entry.finish_reason))
