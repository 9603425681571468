"""Language-model access: chat-completion HTTP client, scripted test LM,
token/cost accounting, and a fine-tune job client.

All backends speak the same chat-completion wire protocol, so the episode
loop and evaluator are backend-agnostic.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .errors import ConfigurationError, ScriptExhaustedError, TransportError

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.openai.com"


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.prompt_tokens + other.prompt_tokens,
            self.completion_tokens + other.completion_tokens,
        )

    def to_dict(self) -> dict:
        return {"prompt_tokens": self.prompt_tokens, "completion_tokens": self.completion_tokens}

    @classmethod
    def from_dict(cls, data: dict) -> "TokenUsage":
        return cls(int(data.get("prompt_tokens", 0)), int(data.get("completion_tokens", 0)))


@dataclass(frozen=True)
class GenerationRequest:
    """One generation call; either a flat prompt or explicit chat messages."""

    prompt: str | None = None
    messages: tuple[dict, ...] | None = None
    temperature: float = 0.0
    max_tokens: int = 512
    stop: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if (self.prompt is None) == (self.messages is None):
            raise ValueError("provide exactly one of prompt or messages")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def chat_messages(self) -> list[dict]:
        if self.messages is not None:
            return list(self.messages)
        return [{"role": "user", "content": self.prompt}]

    def flat_prompt(self) -> str:
        if self.prompt is not None:
            return self.prompt
        return "\n".join(m.get("content", "") for m in self.messages or ())


class LanguageModelClient(Protocol):
    def generate(self, req: GenerationRequest) -> tuple[str, TokenUsage]: ...


def truncate_at_stop(text: str, stops: Sequence[str]) -> str:
    """Cut text at the earliest occurrence of any stop sequence."""
    cut = len(text)
    for stop in stops:
        if not stop:
            continue
        idx = text.find(stop)
        if idx != -1:
            cut = min(cut, idx)
    return text[:cut]


class RateLimiter:
    """Process-wide token bucket; callers block until a request slot is free."""

    def __init__(self, rate_per_sec: float | None, capacity: int = 1):
        if rate_per_sec is not None and rate_per_sec <= 0:
            raise ConfigurationError("rate_per_sec must be positive")
        self.rate = rate_per_sec
        self.capacity = max(1, capacity)
        self._tokens = float(self.capacity)
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if self.rate is None:
            return
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)


class ScriptedLM:
    """Deterministic LM for tests: pops queued responses FIFO.

    Each queued item is either a completion string or a (string, TokenUsage)
    pair; without explicit usage, whitespace token counts are recorded.
    Raises ScriptExhaustedError when the queue runs dry so episode tests fail
    loudly instead of looping.
    """

    def __init__(self, responses: Sequence[str | tuple[str, TokenUsage]]):
        self._queue: deque = deque(responses)
        self._lock = threading.Lock()
        self.calls: list[GenerationRequest] = []

    def generate(self, req: GenerationRequest) -> tuple[str, TokenUsage]:
        with self._lock:
            if not self._queue:
                raise ScriptExhaustedError("scripted LM has no responses left")
            item = self._queue.popleft()
            self.calls.append(req)
        if isinstance(item, tuple):
            text, usage = item
            return truncate_at_stop(text, req.stop), usage
        text = truncate_at_stop(item, req.stop)
        usage = TokenUsage(len(req.flat_prompt().split()), len(text.split()))
        return text, usage

    def __len__(self) -> int:
        return len(self._queue)


_RETRYABLE_STATUS = {408, 409, 429, 500, 502, 503, 504}


class OpenAIChatClient:
    """Chat-completion client with retry/backoff under a shared rate limiter.

    Reads OPENAI_API_KEY and OPENAI_BASE_URL from the environment unless
    given explicitly; base_url override points the client at local or stub
    servers exposing the same endpoint.
    """

    def __init__(
        self,
        model: str,
        api_key: str | None = None,
        base_url: str | None = None,
        rate_limiter: RateLimiter | None = None,
        max_attempts: int = 5,
        backoff_base: float = 1.0,
        timeout: float = 120.0,
        session: requests.Session | None = None,
    ):
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get("OPENAI_API_KEY", "")
        base = base_url if base_url is not None else os.environ.get("OPENAI_BASE_URL", DEFAULT_BASE_URL)
        self.base_url = base.rstrip("/")
        self.rate_limiter = rate_limiter
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._session = session or requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _post_with_retries(self, url: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            try:
                resp = self._session.post(url, json=payload, headers=self._headers(), timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code == 200:
                    return resp.json()
                if resp.status_code not in _RETRYABLE_STATUS:
                    raise TransportError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
                last_error = TransportError(f"HTTP {resp.status_code} from {url}")
            if attempt < self.max_attempts - 1:
                delay = self.backoff_base * (2 ** attempt)
                logger.warning("retrying %s after %.1fs (%s)", url, delay, last_error)
                time.sleep(delay)
        raise TransportError(f"giving up on {url} after {self.max_attempts} attempts: {last_error}")

    def generate(self, req: GenerationRequest) -> tuple[str, TokenUsage]:
        payload = {
            "model": self.model,
            "messages": req.chat_messages(),
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.stop:
            payload["stop"] = list(req.stop)
        data = self._post_with_retries(f"{self.base_url}/v1/chat/completions", payload)
        try:
            content = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed chat completion response: {data!r}") from exc
        usage_data = data.get("usage") or {}
        usage = TokenUsage(
            int(usage_data.get("prompt_tokens", 0)),
            int(usage_data.get("completion_tokens", 0)),
        )
        return truncate_at_stop(content, req.stop), usage


@dataclass(frozen=True)
class ModelPrice:
    input_per_1k: float
    output_per_1k: float
    fine_tuned_multiplier: float = 1.0

    def __post_init__(self) -> None:
        if self.input_per_1k < 0 or self.output_per_1k < 0:
            raise ValueError("prices must be non-negative")
        if self.fine_tuned_multiplier < 1:
            raise ValueError("fine_tuned_multiplier must be >= 1")


@dataclass
class PriceTable:
    models: dict[str, ModelPrice] = field(default_factory=dict)

    def get(self, model: str) -> ModelPrice:
        try:
            return self.models[model]
        except KeyError:
            raise ConfigurationError(f"model {model!r} not present in price table") from None

    @classmethod
    def from_json(cls, path: str | Path) -> "PriceTable":
        import json

        data = json.loads(Path(path).read_text(encoding="utf-8"))
        models = {
            name: ModelPrice(
                input_per_1k=float(entry["input_per_1k"]),
                output_per_1k=float(entry["output_per_1k"]),
                fine_tuned_multiplier=float(entry.get("fine_tuned_multiplier", 1.0)),
            )
            for name, entry in data.items()
        }
        return cls(models)


# Mid-2023 list prices; fine-tuned GPT-3.5 inference was billed 8x base.
DEFAULT_PRICES = PriceTable(
    {
        "gpt-3.5-turbo": ModelPrice(0.0015, 0.002, 8.0),
        "gpt-4": ModelPrice(0.03, 0.06, 1.0),
    }
)


def cost_of(usage: TokenUsage, model: str, fine_tuned: bool, prices: PriceTable) -> float:
    """Dollar cost of one episode's token usage under a price table."""
    price = prices.get(model)
    cost = (
        price.input_per_1k * usage.prompt_tokens / 1000.0
        + price.output_per_1k * usage.completion_tokens / 1000.0
    )
    if fine_tuned:
        cost *= price.fine_tuned_multiplier
    return cost


class FineTuneStatus(str, Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    SUCCEEDED = "Succeeded"
    FAILED = "Failed"

    @property
    def terminal(self) -> bool:
        return self in (FineTuneStatus.SUCCEEDED, FineTuneStatus.FAILED)


_STATUS_ORDER = {
    FineTuneStatus.PENDING: 0,
    FineTuneStatus.RUNNING: 1,
    FineTuneStatus.SUCCEEDED: 2,
    FineTuneStatus.FAILED: 2,
}

_PROVIDER_STATUS = {
    "uploaded": FineTuneStatus.PENDING,
    "validating_files": FineTuneStatus.PENDING,
    "queued": FineTuneStatus.PENDING,
    "pending": FineTuneStatus.PENDING,
    "created": FineTuneStatus.PENDING,
    "running": FineTuneStatus.RUNNING,
    "succeeded": FineTuneStatus.SUCCEEDED,
    "failed": FineTuneStatus.FAILED,
    "cancelled": FineTuneStatus.FAILED,
}


@dataclass(frozen=True)
class FineTuneJob:
    job_id: str
    status: FineTuneStatus
    training_file_ref: str
    base_model: str
    epochs: int
    fine_tuned_model: str | None = None
    message: str | None = None


class FineTuneClient:
    """Delegates fine-tuning to a provider exposing the file + job endpoints."""

    def __init__(
        self,
        api_key: str | None = None,
        base_url: str | None = None,
        max_attempts: int = 5,
        backoff_base: float = 1.0,
        timeout: float = 120.0,
        session: requests.Session | None = None,
    ):
        self.api_key = api_key if api_key is not None else os.environ.get("OPENAI_API_KEY", "")
        base = base_url if base_url is not None else os.environ.get("OPENAI_BASE_URL", DEFAULT_BASE_URL)
        self.base_url = base.rstrip("/")
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self._session = session or requests.Session()

    def _headers(self) -> dict:
        return {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}

    def _request_with_retries(self, method: str, url: str, **kwargs):
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                resp = self._session.request(method, url, headers=self._headers(), timeout=self.timeout, **kwargs)
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code in _RETRYABLE_STATUS:
                    last_error = TransportError(f"HTTP {resp.status_code} from {url}")
                else:
                    return resp
            if attempt < self.max_attempts - 1:
                time.sleep(self.backoff_base * (2 ** attempt))
        raise TransportError(f"giving up on {url} after {self.max_attempts} attempts: {last_error}")

    def submit_finetune(self, training_file: str | Path, base_model: str, epochs: int) -> FineTuneJob:
        path = Path(training_file)
        if not path.is_file():
            raise ConfigurationError(f"training file not found: {path}")
        with path.open("rb") as fh:
            resp = self._request_with_retries(
                "POST",
                f"{self.base_url}/v1/files",
                files={"file": (path.name, fh)},
                data={"purpose": "fine-tune"},
            )
        if resp.status_code != 200:
            return FineTuneJob(
                job_id="",
                status=FineTuneStatus.FAILED,
                training_file_ref="",
                base_model=base_model,
                epochs=epochs,
                message=f"file upload rejected: {resp.text[:500]}",
            )
        file_id = resp.json()["id"]
        resp = self._request_with_retries(
            "POST",
            f"{self.base_url}/v1/fine_tuning/jobs",
            json={
                "training_file": file_id,
                "model": base_model,
                "hyperparameters": {"n_epochs": epochs},
            },
        )
        if resp.status_code != 200:
            return FineTuneJob(
                job_id="",
                status=FineTuneStatus.FAILED,
                training_file_ref=file_id,
                base_model=base_model,
                epochs=epochs,
                message=f"job creation rejected: {resp.text[:500]}",
            )
        data = resp.json()
        return FineTuneJob(
            job_id=data["id"],
            status=_PROVIDER_STATUS.get(data.get("status", "pending"), FineTuneStatus.PENDING),
            training_file_ref=file_id,
            base_model=base_model,
            epochs=epochs,
            fine_tuned_model=data.get("fine_tuned_model"),
            message=data.get("error") and str(data["error"]) or None,
        )

    def poll(self, job: FineTuneJob) -> FineTuneJob:
        """Refresh job status; terminal jobs are returned unchanged."""
        if job.status.terminal:
            return job
        resp = self._request_with_retries("GET", f"{self.base_url}/v1/fine_tuning/jobs/{job.job_id}")
        if resp.status_code != 200:
            raise TransportError(f"job retrieve failed: HTTP {resp.status_code}")
        data = resp.json()
        new_status = _PROVIDER_STATUS.get(data.get("status", "pending"), FineTuneStatus.PENDING)
        # Status transitions are monotone; never regress on a stale read.
        if _STATUS_ORDER[new_status] < _STATUS_ORDER[job.status]:
            new_status = job.status
        return FineTuneJob(
            job_id=job.job_id,
            status=new_status,
            training_file_ref=job.training_file_ref,
            base_model=job.base_model,
            epochs=job.epochs,
            fine_tuned_model=data.get("fine_tuned_model") or job.fine_tuned_model,
            message=data.get("error") and str(data["error"]) or job.message,
        )
