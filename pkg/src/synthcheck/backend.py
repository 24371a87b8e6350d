"""Wire contract for model backends: completion and option scoring over HTTP.

Two endpoints, JSON bodies:
  POST {base_url}/v1/complete       {"prompt", "max_tokens", "top_p", "seed"?} -> {"text"}
  POST {base_url}/v1/score_options  {"prompt", "options"}                      -> {"logprobs"}

Real endpoints and local mocks are interchangeable behind this contract.
"""
from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass
from typing import Sequence

import requests

BACKEND_KINDS = ("completion", "option-scoring", "both")
DEFAULT_MAX_IN_FLIGHT = 4
DEFAULT_TIMEOUT_MS = 30_000
RETRY_ATTEMPTS = 3
RETRY_BACKOFF_S = 0.25


class TransportError(RuntimeError):
    """Retryable transport failure: connection refused/reset or timeout."""


class BackendError(RuntimeError):
    """Non-2xx backend response; carries status and response body."""

    def __init__(self, status: int, message: str):
        self.status = status
        super().__init__(f"backend returned {status}: {message}")


@dataclass(frozen=True)
class BackendDescriptor:
    model_id: str
    base_url: str
    kind: str = "both"
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT
    timeout_ms: int = DEFAULT_TIMEOUT_MS

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"kind must be one of {BACKEND_KINDS}")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")


@dataclass(frozen=True)
class GenerationConfig:
    top_p: float = 1.0
    max_tokens: int = 64
    seed: int | None = None

    def __post_init__(self):
        if not (0.0 < self.top_p <= 1.0):
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


class HttpBackend:
    """Client for one backend endpoint; shareable across worker threads.

    The in-flight limiter is the only synchronized state; retried requests
    reuse the identical payload.
    """

    def __init__(self, descriptor: BackendDescriptor, session: requests.Session | None = None,
                 sleep=time.sleep):
        self.descriptor = descriptor
        self._session = session or requests.Session()
        self._limiter = threading.BoundedSemaphore(descriptor.max_in_flight)
        self._sleep = sleep

    @property
    def model_id(self) -> str:
        return self.descriptor.model_id

    def complete(self, prompt: str, config: GenerationConfig) -> str:
        if self.descriptor.kind not in ("completion", "both"):
            raise ValueError(f"backend {self.model_id!r} does not support completion")
        payload = {
            "prompt": prompt,
            "max_tokens": config.max_tokens,
            "top_p": config.top_p,
        }
        if config.seed is not None:
            payload["seed"] = config.seed
        body = self._post("/v1/complete", payload)
        text = body.get("text")
        if not isinstance(text, str):
            raise BackendError(200, f"malformed completion body: {body!r}")
        return text

    def score_options(self, prompt: str, options: Sequence[str]) -> dict[str, float]:
        if self.descriptor.kind not in ("option-scoring", "both"):
            raise ValueError(f"backend {self.model_id!r} does not support option scoring")
        if not options:
            raise ValueError("options must be non-empty")
        if len(set(options)) != len(options):
            raise ValueError("options must be distinct")
        payload = {"prompt": prompt, "options": list(options)}
        body = self._post("/v1/score_options", payload)
        logprobs = body.get("logprobs")
        if not isinstance(logprobs, dict):
            raise BackendError(200, f"malformed score body: {body!r}")
        scores: dict[str, float] = {}
        for option in options:
            value = logprobs.get(option)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise BackendError(200, f"missing or non-finite score for option {option!r}")
            scores[option] = float(value)
        return scores

    def _post(self, path: str, payload: dict) -> dict:
        url = self.descriptor.base_url.rstrip("/") + path
        timeout_s = self.descriptor.timeout_ms / 1000.0
        last_error: Exception | None = None
        with self._limiter:
            for attempt in range(RETRY_ATTEMPTS):
                if attempt:
                    self._sleep(RETRY_BACKOFF_S * (2 ** (attempt - 1)))
                try:
                    response = self._session.post(url, json=payload, timeout=timeout_s)
                except (requests.ConnectionError, requests.Timeout) as exc:
                    last_error = exc
                    continue
                if response.status_code // 100 != 2:
                    raise BackendError(response.status_code, response.text.strip())
                try:
                    return response.json()
                except ValueError as exc:
                    raise BackendError(response.status_code, f"non-JSON body: {exc}") from exc
        raise TransportError(f"{url}: {last_error}")
