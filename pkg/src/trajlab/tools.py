"""Google-search tool client with the answer-extraction priority chain, plus
robustness perturbation wrappers and an observation pool."""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol

import requests

from .errors import ConfigurationError, ToolError

logger = logging.getLogger(__name__)

SERPAPI_URL = "https://serpapi.com/search"
SERPAPI_KEY_ENV = "SERPAPI_KEY"

# The degenerate observation: returned when extraction finds nothing, when
# transport fails, and by the "None" perturbation mode.
NONE_OBSERVATION = "None"


class Tool(Protocol):
    def search(self, query: str) -> str: ...


def _nonempty_str(value) -> str | None:
    if isinstance(value, str) and value.strip():
        return value
    return None


def extract_answer(raw) -> str:
    """Extract the observation text from a search API payload.

    Checks, in priority order: answer-box answer, answer-box snippet,
    answer-box highlighted words (joined by ", "), then the first organic
    result's snippet. Total: malformed payloads and all-absent fields yield
    "None".
    """
    if not isinstance(raw, dict):
        return NONE_OBSERVATION
    box = raw.get("answer_box")
    if isinstance(box, dict):
        answer = _nonempty_str(box.get("answer"))
        if answer:
            return answer
        snippet = _nonempty_str(box.get("snippet"))
        if snippet:
            return snippet
        words = box.get("snippet_highlighted_words") or box.get("highlighted_words")
        if isinstance(words, list):
            joined = ", ".join(w for w in words if isinstance(w, str) and w.strip())
            if joined:
                return joined
    organic = raw.get("organic_results")
    if isinstance(organic, list) and organic and isinstance(organic[0], dict):
        snippet = _nonempty_str(organic[0].get("snippet"))
        if snippet:
            return snippet
    return NONE_OBSERVATION


class ObservationPool:
    """Append-only pool of observations gathered from prior runs.

    With a path, every append is mirrored to a JSONL file (one {"obs": ...}
    record per line) so later experiments can draw from earlier ones.
    """

    def __init__(self, path: str | Path | None = None):
        self._lock = threading.Lock()
        self._observations: list[str] = []
        self._path = Path(path) if path is not None else None
        if self._path is not None and self._path.exists():
            with self._path.open(encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._observations.append(json.loads(line)["obs"])

    def append(self, observation: str) -> None:
        with self._lock:
            self._observations.append(observation)
            if self._path is not None:
                with self._path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"obs": observation}, ensure_ascii=False) + "\n")

    def sample(self, rng: random.Random) -> str:
        with self._lock:
            if not self._observations:
                raise ConfigurationError("cannot sample from an empty observation pool")
            return self._observations[rng.randrange(len(self._observations))]

    def __len__(self) -> int:
        with self._lock:
            return len(self._observations)


class SerpApiClient:
    """Search client: one HTTP GET per distinct query, cached for the run.

    The cache makes search a pure function of the query within a run, and
    every extracted observation feeds the pool for later robustness
    experiments. Transport failure after retries degrades to "None" so the
    episode can continue.
    """

    def __init__(
        self,
        api_key: str | None = None,
        pool: ObservationPool | None = None,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
        timeout: float = 30.0,
        session: requests.Session | None = None,
        url: str = SERPAPI_URL,
    ):
        key = api_key if api_key is not None else os.environ.get(SERPAPI_KEY_ENV)
        if not key:
            raise ConfigurationError(f"no SerpAPI key: pass api_key or set {SERPAPI_KEY_ENV}")
        self.api_key = key
        self.pool = pool if pool is not None else ObservationPool()
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self.url = url
        self._session = session or requests.Session()
        self._cache: dict[str, str] = {}
        self._lock = threading.Lock()

    def search(self, query: str) -> str:
        if not query.strip():
            raise ValueError("search query must be non-empty")
        with self._lock:
            if query in self._cache:
                return self._cache[query]
        extracted = self._fetch(query)
        with self._lock:
            # Another episode may have raced us; keep the first result so the
            # cache stays a pure function of the query.
            cached = self._cache.setdefault(query, extracted)
        if cached is extracted:
            self.pool.append(extracted)
        return cached

    def _fetch(self, query: str) -> str:
        params = {"q": query, "engine": "google", "api_key": self.api_key}
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                resp = self._session.get(self.url, params=params, timeout=self.timeout)
                if resp.status_code == 200:
                    return extract_answer(resp.json())
                last_error = ToolError(f"HTTP {resp.status_code} from search API")
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
            if attempt < self.max_attempts - 1:
                time.sleep(self.backoff_base * (2 ** attempt))
        logger.warning("search failed for %r after %d attempts: %s", query, self.max_attempts, last_error)
        return NONE_OBSERVATION


class ScriptedTool:
    """Deterministic search tool for tests: query -> fixed observation.

    Fixture values may be extracted strings or raw API payloads (dicts run
    through extract_answer). Unknown queries raise LookupError so tests fail
    loudly.
    """

    def __init__(self, fixtures: dict[str, str | dict], pool: ObservationPool | None = None):
        self._fixtures = dict(fixtures)
        self.pool = pool if pool is not None else ObservationPool()
        self.calls: list[str] = []
        self._lock = threading.Lock()

    def search(self, query: str) -> str:
        if not query.strip():
            raise ValueError("search query must be non-empty")
        with self._lock:
            self.calls.append(query)
            if query not in self._fixtures:
                raise LookupError(f"no fixture for query {query!r}")
            value = self._fixtures[query]
        extracted = extract_answer(value) if isinstance(value, dict) else value
        self.pool.append(extracted)
        return extracted


class PerturbMode(str, Enum):
    OFF = "off"
    NONE = "none"      # replace with the literal observation "None"
    RANDOM = "random"  # replace with a random pooled observation


@dataclass(frozen=True)
class PerturbationConfig:
    mode: PerturbMode = PerturbMode.OFF
    probability: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must lie in [0, 1]")


class PerturbedTool:
    """Wraps a tool, replacing observations with probability cfg.probability.

    The seeded generator is serialized behind a lock, so a fixed seed and a
    fixed call order reproduce the replacement decisions bit-exactly. The
    inner tool is not called for replaced observations.
    """

    def __init__(self, inner: Tool, cfg: PerturbationConfig, pool: ObservationPool):
        if cfg.mode is PerturbMode.RANDOM and len(pool) == 0:
            raise ConfigurationError("random perturbation needs a pre-seeded observation pool")
        self.inner = inner
        self.cfg = cfg
        self.pool = pool
        self._rng = random.Random(cfg.seed)
        self._lock = threading.Lock()
        self.replacements = 0
        self.calls = 0

    def search(self, query: str) -> str:
        with self._lock:
            self.calls += 1
            replace = self._rng.random() < self.cfg.probability
            replacement: str | None = None
            if replace:
                self.replacements += 1
                if self.cfg.mode is PerturbMode.NONE:
                    replacement = NONE_OBSERVATION
                else:
                    replacement = self.pool.sample(self._rng)
        if replacement is not None:
            return replacement
        return self.inner.search(query)


def perturb(inner: Tool, cfg: PerturbationConfig, pool: ObservationPool | None = None) -> Tool:
    """Wrap a tool per the perturbation config; mode 'off' is the identity."""
    if cfg.mode is PerturbMode.OFF:
        return inner
    if pool is None:
        pool = getattr(inner, "pool", None)
    if pool is None:
        pool = ObservationPool()
    return PerturbedTool(inner, cfg, pool)
