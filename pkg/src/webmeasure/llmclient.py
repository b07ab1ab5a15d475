"""Chat-completion client over Gemini-style and OpenAI-compatible HTTP endpoints.

The client enforces a per-backend concurrency cap and a requests-per-minute
limit, and retries 429/5xx/timeouts with exponential backoff plus jitter.
"""

from __future__ import annotations

import base64
import collections
import enum
import hashlib
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol

import httpx

logger = logging.getLogger(__name__)


class LLMError(RuntimeError):
    retryable = False


class AuthError(LLMError):
    pass


class QuotaExhaustedError(LLMError):
    pass


class PayloadTooLargeError(LLMError):
    pass


class TransportError(LLMError):
    pass


class PreconditionError(LLMError, ValueError):
    pass


class UnknownFingerprintError(LLMError, KeyError):
    pass


class WireDialect(str, enum.Enum):
    GEMINI = "gemini-style"
    OPENAI = "openai-compatible"


@dataclass(frozen=True)
class BackendConfig:
    name: str
    endpoint_url: str
    model_id: str
    wire_dialect: WireDialect = WireDialect.OPENAI
    api_key_env: str | None = None
    max_concurrent: int = 4
    requests_per_minute: int = 60
    max_retries: int = 5
    timeout: float = 120.0
    supports_images: bool = True
    backoff_base: float = 1.0
    backoff_max: float = 60.0
    max_payload_bytes: int = 20 * 1024 * 1024

    def __post_init__(self) -> None:
        object.__setattr__(self, "wire_dialect", WireDialect(self.wire_dialect))
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.requests_per_minute < 1:
            raise ValueError("requests_per_minute must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_mapping(cls, name: str, data: Mapping) -> BackendConfig:
        known = {f for f in cls.__dataclass_fields__ if f != "name"}
        # "dialect" is accepted as shorthand in config files.
        data = dict(data)
        if "dialect" in data:
            data["wire_dialect"] = data.pop("dialect")
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"backend {name!r}: unknown keys {sorted(unknown)}")
        return cls(name=name, **data)


@dataclass(frozen=True)
class CompletionRequest:
    text: str
    images: tuple[bytes, ...] = ()
    temperature: float = 0.0


@dataclass(frozen=True)
class CompletionResult:
    text: str
    input_tokens: int | None = None
    output_tokens: int | None = None
    latency: float = 0.0
    attempts: int = 1


class Backend(Protocol):
    """What the classification pipeline needs from a model handle."""

    name: str
    max_concurrent: int
    supports_images: bool

    def complete(self, request: CompletionRequest) -> CompletionResult: ...


class RateLimiter:
    """Sliding 60 s window: never more than ``per_minute`` dispatches in any window."""

    def __init__(
        self,
        per_minute: int,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
        window: float = 60.0,
    ):
        self.per_minute = per_minute
        self.window = window
        self.clock = clock
        self.sleep = sleep
        self._sent: collections.deque[float] = collections.deque()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        """Block until a slot is free; return the dispatch time."""
        while True:
            with self._lock:
                now = self.clock()
                while self._sent and now - self._sent[0] >= self.window:
                    self._sent.popleft()
                if len(self._sent) < self.per_minute:
                    self._sent.append(now)
                    return now
                wait = self._sent[0] + self.window - now
            self.sleep(wait)


def backoff_delay(attempt: int, base: float = 1.0, cap: float = 60.0) -> float:
    """Delay before retry number ``attempt`` (0-based), without jitter."""
    return min(cap, base * (2**attempt))


def _jitter(delay: float, rng: random.Random) -> float:
    return delay + rng.uniform(0, delay / 2)


class _Retry(Exception):
    def __init__(self, status: int | None, detail: str):
        self.status = status
        self.detail = detail


class LLMClient:
    """HTTP chat-completion client for one configured backend; safe to share across threads."""

    def __init__(
        self,
        config: BackendConfig,
        *,
        http: httpx.Client | None = None,
        limiter: RateLimiter | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.config = config
        self.http = http or httpx.Client(timeout=config.timeout)
        self.limiter = limiter or RateLimiter(config.requests_per_minute)
        self.sleep = sleep
        self.rng = rng or random.Random()
        self._slots = threading.BoundedSemaphore(config.max_concurrent)

    @property
    def name(self) -> str:
        return self.config.name

    @property
    def max_concurrent(self) -> int:
        return self.config.max_concurrent

    @property
    def supports_images(self) -> bool:
        return self.config.supports_images

    def _api_key(self) -> str | None:
        env = self.config.api_key_env
        if not env:
            return None
        key = os.environ.get(env)
        if not key:
            raise AuthError(f"environment variable {env} is not set for backend {self.config.name}")
        return key

    def build_http_request(self, req: CompletionRequest) -> tuple[str, dict, dict]:
        """The HTTP request for ``req`` in the backend's dialect."""
        cfg = self.config
        key = self._api_key()
        headers = {"Content-Type": "application/json"}
        base = cfg.endpoint_url.rstrip("/")
        if cfg.wire_dialect is WireDialect.GEMINI:
            url = f"{base}/models/{cfg.model_id}:generateContent"
            if key:
                headers["x-goog-api-key"] = key
            parts: list[dict] = [{"text": req.text}]
            parts += [
                {"inline_data": {"mime_type": "image/png", "data": base64.b64encode(img).decode("ascii")}}
                for img in req.images
            ]
            payload = {
                "contents": [{"role": "user", "parts": parts}],
                "generationConfig": {"temperature": req.temperature},
            }
        else:
            url = f"{base}/chat/completions"
            if key:
                headers["Authorization"] = f"Bearer {key}"
            if req.images:
                content: str | list = [{"type": "text", "text": req.text}] + [
                    {
                        "type": "image_url",
                        "image_url": {"url": "data:image/png;base64," + base64.b64encode(img).decode("ascii")},
                    }
                    for img in req.images
                ]
            else:
                content = req.text
            payload = {
                "model": cfg.model_id,
                "messages": [{"role": "user", "content": content}],
                "temperature": req.temperature,
                "stream": False,
            }
        return url, headers, payload

    def _parse(self, data: dict) -> tuple[str, int | None, int | None]:
        try:
            if self.config.wire_dialect is WireDialect.GEMINI:
                parts = data["candidates"][0]["content"]["parts"]
                text = "".join(p.get("text", "") for p in parts)
                usage = data.get("usageMetadata", {})
                return text, usage.get("promptTokenCount"), usage.get("candidatesTokenCount")
            text = data["choices"][0]["message"]["content"] or ""
            usage = data.get("usage") or {}
            return text, usage.get("prompt_tokens"), usage.get("completion_tokens")
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response shape from {self.config.name}: {exc!r}") from None

    def complete(self, req: CompletionRequest) -> CompletionResult:
        cfg = self.config
        if req.images and not cfg.supports_images:
            raise PreconditionError(f"backend {cfg.name} does not accept images")
        url, headers, payload = self.build_http_request(req)
        size = len(httpx.Request("POST", url, json=payload).content)
        if size > cfg.max_payload_bytes:
            raise PayloadTooLargeError(f"request of {size} bytes exceeds {cfg.max_payload_bytes}")

        started = time.monotonic()
        last: _Retry | None = None
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                delay = _jitter(backoff_delay(attempt - 1, cfg.backoff_base, cfg.backoff_max), self.rng)
                logger.warning(
                    "%s: %s, retry %d/%d in %.1fs", cfg.name, last.detail, attempt, cfg.max_retries, delay
                )
                self.sleep(delay)
            try:
                with self._slots:
                    self.limiter.acquire()
                    data = self._post(url, headers, payload)
            except _Retry as exc:
                last = exc
                continue
            text, tin, tout = self._parse(data)
            return CompletionResult(text, tin, tout, time.monotonic() - started, attempt + 1)
        assert last is not None
        if last.status == 429:
            raise QuotaExhaustedError(f"{cfg.name}: rate limited after {cfg.max_retries + 1} attempts")
        raise TransportError(f"{cfg.name}: {last.detail} after {cfg.max_retries + 1} attempts")

    def _post(self, url: str, headers: dict, payload: dict) -> dict:
        try:
            resp = self.http.post(url, headers=headers, json=payload, timeout=self.config.timeout)
        except httpx.TimeoutException as exc:
            raise _Retry(None, f"timeout ({exc.__class__.__name__})") from None
        except httpx.TransportError as exc:
            raise _Retry(None, f"connection error ({exc})") from None
        status = resp.status_code
        if status in (401, 403):
            raise AuthError(f"{self.config.name}: HTTP {status}: {resp.text[:200]}")
        if status == 413:
            raise PayloadTooLargeError(f"{self.config.name}: HTTP 413")
        if status == 429 or status >= 500:
            raise _Retry(status, f"HTTP {status}")
        if status >= 400:
            raise TransportError(f"{self.config.name}: HTTP {status}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError:
            raise TransportError(f"{self.config.name}: non-JSON response body") from None

    def close(self) -> None:
        self.http.close()


_clients: dict[BackendConfig, LLMClient] = {}
_clients_lock = threading.Lock()


def complete(cfg: BackendConfig, req: CompletionRequest) -> CompletionResult:
    """One-call convenience; clients (and their limiters) are shared per config."""
    with _clients_lock:
        client = _clients.get(cfg)
        if client is None:
            client = _clients[cfg] = LLMClient(cfg)
    return client.complete(req)


def fingerprint(req: CompletionRequest | str) -> str:
    """Stable digest of a request's text and images."""
    h = hashlib.sha256()
    if isinstance(req, str):
        h.update(req.encode("utf-8"))
        return h.hexdigest()
    h.update(req.text.encode("utf-8"))
    for img in req.images:
        h.update(b"\0")
        h.update(hashlib.sha256(img).digest())
    return h.hexdigest()


Generator = Callable[[CompletionRequest, Callable[[str], bool]], str]


@dataclass
class MockBackend:
    """Offline stand-in for a model.

    Answers come from ``script`` (request fingerprint -> canned text) or from
    ``generator(request, corrupt)``. ``corrupt(key)`` is a deterministic coin
    flip with probability ``error_rate`` derived from ``seed`` and ``key``, so
    corruption decisions do not depend on batching or thread scheduling.
    """

    script: Mapping[str, str] = field(default_factory=dict)
    generator: Generator | None = None
    error_rate: float = 0.0
    seed: int = 0
    name: str = "mock"
    max_concurrent: int = 1
    supports_images: bool = True
    calls: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self) -> None:
        if not self.script and self.generator is None:
            raise ValueError("MockBackend needs a script or a generator")
        if not 0.0 <= self.error_rate <= 1.0:
            raise ValueError("error_rate must lie in [0, 1]")

    def should_corrupt(self, key: str) -> bool:
        if self.error_rate <= 0:
            return False
        return random.Random(f"{self.seed}|{key}").random() < self.error_rate

    def complete(self, request: CompletionRequest) -> CompletionResult:
        if request.images and not self.supports_images:
            raise PreconditionError(f"backend {self.name} does not accept images")
        with self._lock:
            self.calls += 1
        fp = fingerprint(request)
        if fp in self.script:
            return CompletionResult(self.script[fp])
        if self.generator is None:
            raise UnknownFingerprintError(f"no scripted answer for request {fp[:12]}")
        return CompletionResult(self.generator(request, self.should_corrupt))


def mock_backend(
    script: Mapping[str, str] | None = None,
    error_rate: float = 0.0,
    seed: int = 0,
    generator: Generator | None = None,
    **kwargs,
) -> MockBackend:
    return MockBackend(script=dict(script or {}), generator=generator, error_rate=error_rate, seed=seed, **kwargs)
