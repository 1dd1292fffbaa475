"""Chat-completion transport with record/replay fixtures.

A :class:`LLMClient` wraps a *backend* (any callable taking a
:class:`CompletionRequest` and returning text) and runs in one of three modes:

``live``    call the backend.
``record``  call the backend and append every exchange to a fixture store.
``replay``  never call the backend; answer from the fixture store.

Fixture files are JSON lines ``{"fingerprint", "request", "response"}``. When a
fingerprint was recorded several times, replay hands the responses out in
recorded order and then keeps repeating the last one.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal, Optional, Sequence

import httpx

log = logging.getLogger(__name__)

Role = Literal["system", "user", "assistant"]
Mode = Literal["live", "record", "replay"]
MODES = ("live", "record", "replay")


class LLMError(Exception):
    pass


class ConfigurationError(LLMError):
    pass


class TransportError(LLMError):
    def __init__(self, message: str, retryable: bool = True):
        super().__init__(message)
        self.retryable = retryable


class FixtureNotFound(LLMError):
    def __init__(self, fingerprint: str):
        super().__init__(f"fixture not found for request {fingerprint}")
        self.fingerprint = fingerprint


@dataclass(frozen=True)
class Message:
    role: Role
    content: str


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_output_tokens: int = 1024

    def __post_init__(self):
        msgs = tuple(m if isinstance(m, Message) else Message(*m) for m in self.messages)
        object.__setattr__(self, "messages", msgs)
        object.__setattr__(self, "temperature", float(self.temperature))
        if not msgs:
            raise ValueError("a completion request needs at least one message")
        for m in msgs:
            if m.role not in ("system", "user", "assistant"):
                raise ValueError(f"unknown role {m.role!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")

    def canonical(self) -> dict:
        """The fields that identify a request; ``max_output_tokens`` is not one of them."""
        return {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
        }

    @property
    def fingerprint(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        d = self.canonical()
        d["max_output_tokens"] = self.max_output_tokens
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CompletionRequest":
        return cls(
            model=d["model"],
            messages=tuple(Message(m["role"], m["content"]) for m in d["messages"]),
            temperature=d.get("temperature", 0.0),
            max_output_tokens=d.get("max_output_tokens", 1024),
        )

    @classmethod
    def user(cls, model: str, content: str, **kw) -> "CompletionRequest":
        return cls(model=model, messages=(Message("user", content),), **kw)


class FixtureStore:
    """Append-only JSONL store of recorded exchanges."""

    def __init__(self, path: Optional[Path | str] = None):
        self.path = Path(path) if path is not None else None
        self._responses: dict[str, list[str]] = defaultdict(list)
        self._served: dict[str, int] = defaultdict(int)
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    self._responses[rec["fingerprint"]].append(rec["response"])
                except (json.JSONDecodeError, KeyError) as exc:
                    raise ValueError(f"{self.path}:{lineno}: bad fixture record ({exc})") from exc

    def __contains__(self, fingerprint: str) -> bool:
        return fingerprint in self._responses

    def __len__(self) -> int:
        return sum(len(v) for v in self._responses.values())

    def lookup(self, request: CompletionRequest) -> str:
        fp = request.fingerprint
        with self._lock:
            answers = self._responses.get(fp)
            if not answers:
                raise FixtureNotFound(fp)
            k = self._served[fp]
            self._served[fp] = k + 1
        return answers[min(k, len(answers) - 1)]

    def append(self, request: CompletionRequest, response: str) -> None:
        fp = request.fingerprint
        with self._lock:
            if response in self._responses.get(fp, ()):
                return
            self._responses[fp].append(response)
            if self.path is not None:
                rec = {"fingerprint": fp, "request": request.to_dict(), "response": response}
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8", newline="\n") as fh:
                    fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


@dataclass
class RetryPolicy:
    retries: int = 3
    base_delay: float = 1.0

    def delays(self) -> list[float]:
        return [self.base_delay * 2**k for k in range(self.retries)]


Backend = Callable[[CompletionRequest], str]


@dataclass
class LLMClient:
    backend: Optional[Backend] = None
    mode: Mode = "live"
    store: Optional[FixtureStore] = None
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    sleep: Callable[[float], None] = time.sleep

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode in ("record", "replay") and self.store is None:
            raise ConfigurationError(f"{self.mode} mode needs a fixture store")
        if self.mode in ("live", "record") and self.backend is None:
            raise ConfigurationError(f"{self.mode} mode needs a backend")

    def complete(self, request: CompletionRequest) -> str:
        if self.mode == "replay":
            return self.store.lookup(request)
        text = self._call_with_retries(request)
        if self.mode == "record":
            self.store.append(request, text)
        return text

    def _call_with_retries(self, request: CompletionRequest) -> str:
        delays = self.retry.delays()
        attempt = 0
        while True:
            try:
                return self.backend(request)
            except TransportError as exc:
                if not exc.retryable or attempt >= len(delays):
                    raise TransportError(
                        f"giving up after {attempt + 1} attempt(s): {exc}", retryable=False
                    ) from exc
                log.warning("transport error (%s); retrying in %.1fs", exc, delays[attempt])
                self.sleep(delays[attempt])
                attempt += 1


class OpenAIChatBackend:
    """Minimal client for an OpenAI-compatible ``/chat/completions`` endpoint."""

    def __init__(
        self,
        api_key: Optional[str],
        base_url: Optional[str] = None,
        timeout: float = 60.0,
        http_client: Optional[httpx.Client] = None,
    ):
        if not api_key:
            raise ConfigurationError("no API key configured (set PEERMIRROR_API_KEY)")
        self.api_key = api_key
        self.base_url = (base_url or "https://api.openai.com/v1").rstrip("/")
        self.timeout = timeout
        self._http = http_client

    def _client(self) -> httpx.Client:
        if self._http is None:
            self._http = httpx.Client(timeout=self.timeout)
        return self._http

    def __call__(self, request: CompletionRequest) -> str:
        payload = {
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        try:
            resp = self._client().post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers={"Authorization": f"Bearer {self.api_key}"},
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}", retryable=False)
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed response body: {exc}", retryable=False) from exc
        return content or ""

