"""Provider-agnostic chat-completion access with record/replay cassettes.

One wire dialect (OpenAI-compatible ``POST /v1/chat/completions``) serves
every provider via per-provider base URLs and auth headers. Requests are
identified by a fingerprint over the canonicalized body, which keys the
cassette store: ``record`` mode persists every response, ``replay`` mode
never touches the network. Credentials come from environment variables at
send time and are never stored on requests, cassettes, or records.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import CassetteMissError, PlanError, RetriesExhaustedError, TransportError

CASSETTE_VERSION = 1
RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class ProviderConfig:
    name: str
    base_url: str | None = None
    auth_env: str | None = None
    max_in_flight: int = 4
    bot: str | None = None  # synthetic transport kind, e.g. "echo"
    bot_seed: int = 0


@dataclass(frozen=True)
class ChatRequest:
    provider: str
    model: str
    messages: tuple[tuple[str, str], ...]  # (role, content)
    temperature: float = 0.0
    max_tokens: int = 2048

    def body(self) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    def fingerprint(self) -> str:
        canon = json.dumps(
            {"provider": self.provider, **self.body()},
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatResponse:
    text: str
    status: int = 200
    provider: str = ""
    model: str = ""


@dataclass(frozen=True)
class RequestAux:
    """Out-of-band context that synthetic oracle bots may read.

    Real transports ignore it; it never leaves the process.
    """

    k_out: int
    vocabulary: tuple[str, ...] = ()
    reference: tuple[str, ...] = ()
    instance_id: int = -1


class HttpTransport:
    """Live OpenAI-compatible wire transport."""

    def __init__(self, providers: dict[str, ProviderConfig], client: httpx.Client | None = None):
        self._providers = providers
        self._client = client or httpx.Client(timeout=60.0)

    def complete(self, request: ChatRequest, aux: RequestAux | None = None) -> ChatResponse:
        cfg = self._providers.get(request.provider)
        if cfg is None or cfg.base_url is None:
            raise PlanError(f"no base_url configured for provider {request.provider!r}")
        headers = {"Content-Type": "application/json"}
        if cfg.auth_env:
            key = os.environ.get(cfg.auth_env)
            if not key:
                raise TransportError(
                    f"credential env var {cfg.auth_env} is unset", retryable=False
                )
            headers["Authorization"] = f"Bearer {key}"
        url = cfg.base_url.rstrip("/") + "/chat/completions"
        try:
            resp = self._client.post(url, json=request.body(), headers=headers)
        except httpx.TimeoutException as exc:
            raise TransportError(f"timeout calling {request.provider}: {exc}", retryable=True)
        except httpx.HTTPError as exc:
            raise TransportError(f"transport failure: {exc}", retryable=True)
        if resp.status_code in RETRYABLE_STATUSES:
            raise TransportError(
                f"{request.provider} returned {resp.status_code}",
                status=resp.status_code,
                retryable=True,
            )
        if resp.status_code != 200:
            raise TransportError(
                f"{request.provider} returned {resp.status_code}",
                status=resp.status_code,
                retryable=False,
            )
        try:
            text = resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"malformed completion payload: {exc}", retryable=False)
        return ChatResponse(
            text=text, status=200, provider=request.provider, model=request.model
        )


class CompositeTransport:
    """Routes each request to its provider's transport (bot or HTTP)."""

    def __init__(self, providers: dict[str, ProviderConfig], client: httpx.Client | None = None):
        from .bots import make_bot  # local import avoids a cycle

        self._bots = {
            name: make_bot(cfg) for name, cfg in providers.items() if cfg.bot
        }
        http_providers = {n: c for n, c in providers.items() if not c.bot}
        self._http = HttpTransport(http_providers, client=client) if http_providers else None

    def complete(self, request: ChatRequest, aux: RequestAux | None = None) -> ChatResponse:
        bot = self._bots.get(request.provider)
        if bot is not None:
            return bot.complete(request, aux)
        if self._http is None:
            raise PlanError(f"unknown provider {request.provider!r}")
        return self._http.complete(request, aux)


class CassetteTransport:
    """Wraps a transport with a fingerprint-keyed response store.

    Record mode is idempotent: a fingerprint already on file short-circuits
    the inner call, which is what makes interrupted runs resumable. Replay
    mode performs no network I/O at all.
    """

    def __init__(self, inner, path: str | Path, record: bool):
        self._inner = inner
        self._path = Path(path)
        self._record = record
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        if self._path.exists():
            with self._path.open(encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        entry = json.loads(line)
                        self._entries[entry["fingerprint"]] = entry

    def complete(self, request: ChatRequest, aux: RequestAux | None = None) -> ChatResponse:
        fp = request.fingerprint()
        with self._lock:
            hit = self._entries.get(fp)
        if hit is not None:
            return ChatResponse(
                text=hit["text"],
                status=hit["status"],
                provider=hit["provider"],
                model=hit["model"],
            )
        if not self._record:
            raise CassetteMissError(fp)
        start = time.monotonic()
        response = self._inner.complete(request, aux)
        entry = {
            "version": CASSETTE_VERSION,
            "fingerprint": fp,
            "text": response.text,
            "status": response.status,
            "latency_s": round(time.monotonic() - start, 6),
            "timestamp": time.time(),
            "provider": request.provider,
            "model": request.model,
        }
        with self._lock:
            # a concurrent identical request may have landed first; the
            # recorded entry wins so the run stays self-consistent
            winner = self._entries.setdefault(fp, entry)
            if winner is entry:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                with self._path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry) + "\n")
        return ChatResponse(
            text=winner["text"],
            status=winner["status"],
            provider=winner["provider"],
            model=winner["model"],
        )


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 5
    base_delay: float = 1.0
    jitter_seed: int = 0


def with_retry(send, policy: RetryPolicy) -> tuple[ChatResponse, list[dict]]:
    """Exponential backoff on retryable errors; everything else surfaces once.

    Returns the response together with the attempt log.
    """
    if policy.max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    jitter = random.Random(policy.jitter_seed)
    attempts: list[dict] = []
    last_error: Exception | None = None
    for attempt in range(1, policy.max_attempts + 1):
        try:
            response = send()
            attempts.append({"attempt": attempt, "outcome": "ok"})
            return response, attempts
        except (TransportError, CassetteMissError) as exc:
            retryable = isinstance(exc, TransportError) and exc.retryable
            status = exc.status if isinstance(exc, TransportError) else None
            last_error = exc
            if not retryable:
                attempts.append(
                    {"attempt": attempt, "outcome": "fatal", "status": status, "error": str(exc)}
                )
                raise
            delay = 0.0
            if attempt < policy.max_attempts:
                delay = policy.base_delay * 2 ** (attempt - 1) * (1.0 + 0.1 * jitter.random())
            attempts.append(
                {
                    "attempt": attempt,
                    "outcome": "retryable_error",
                    "status": status,
                    "delay_s": round(delay, 6),
                }
            )
            if attempt < policy.max_attempts and delay > 0:
                time.sleep(delay)
    raise RetriesExhaustedError(last_error, policy.max_attempts)


class Gateway:
    """Transport stack plus per-provider concurrency bounds and retries."""

    def __init__(
        self,
        providers: dict[str, ProviderConfig],
        mode: str = "live",
        cassette_path: str | Path | None = None,
        retry: RetryPolicy | None = None,
        client: httpx.Client | None = None,
    ):
        if mode not in ("live", "record", "replay"):
            raise PlanError(f"unknown transport mode {mode!r}")
        self.mode = mode
        self.retry = retry or RetryPolicy()
        inner = CompositeTransport(providers, client=client) if mode != "replay" else None
        if mode == "live":
            self._transport = inner
        else:
            if cassette_path is None:
                raise PlanError(f"{mode} mode needs a cassette path")
            self._transport = CassetteTransport(inner, cassette_path, record=(mode == "record"))
        self._semaphores = {
            name: threading.Semaphore(cfg.max_in_flight) for name, cfg in providers.items()
        }

    def complete(self, request: ChatRequest, aux: RequestAux | None = None) -> tuple[ChatResponse, list[dict]]:
        sem = self._semaphores.get(request.provider)
        if sem is None:
            raise PlanError(f"unknown provider {request.provider!r}")
        with sem:
            return with_retry(lambda: self._transport.complete(request, aux), self.retry)
