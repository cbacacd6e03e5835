"""LLM provider access: transports, disk cache, rate limiting, retries.

The rest of the package talks to a :class:`ProviderClient` and never to a
model API directly. A client wraps a transport (real HTTP or the seeded
mock), enforces a parallelism cap and a sliding-window rate limit, retries
transient failures with exponential backoff, and memoizes responses on disk
keyed by the exact request parameters, so reruns cost nothing.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional

import httpx

logger = logging.getLogger(__name__)

TRANSLATE_KEY_ENV = "AUTOARABIC_TRANSLATE_KEY"
JUDGE_KEY_ENV = "AUTOARABIC_JUDGE_KEY"


class ProviderError(Exception):
    pass


class CredentialsError(ProviderError):
    """Missing or unusable API credentials; raised at construction time."""


class TransportError(ProviderError):
    """Transient transport failure; safe to retry."""


@dataclass(frozen=True)
class ProviderConfig:
    model: str
    temperature: float
    top_p: float = 1.0
    max_parallel: int = 4
    max_attempts: int = 5
    backoff_base_seconds: float = 1.0
    backoff_cap_seconds: float = 60.0
    rate_limit_requests: int = 60
    rate_limit_window_seconds: float = 60.0
    cache_dir: Optional[str] = None

    def cache_key(self, prompt: str) -> str:
        payload = json.dumps(
            {
                "model": self.model,
                "prompt": prompt,
                "temperature": self.temperature,
                "top_p": self.top_p,
            },
            ensure_ascii=False,
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class RateLimiter:
    """Sliding-window limiter: at most ``max_requests`` per ``window_seconds``."""

    def __init__(
        self,
        max_requests: int,
        window_seconds: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if max_requests < 1:
            raise ValueError("max_requests must be >= 1")
        self.max_requests = max_requests
        self.window_seconds = window_seconds
        self._clock = clock
        self._sleep = sleep
        self._sent: deque = deque()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                while self._sent and now - self._sent[0] >= self.window_seconds:
                    self._sent.popleft()
                if len(self._sent) < self.max_requests:
                    self._sent.append(now)
                    return
                wait = self.window_seconds - (now - self._sent[0])
            self._sleep(max(wait, 0.0))


class HttpTransport:
    """Plain JSON-over-HTTP transport.

    POSTs ``{model, prompt, temperature, top_p}`` with a bearer token and
    expects ``{"text": ...}`` back. The token comes from ``key_env`` at
    construction; a missing variable fails immediately rather than on the
    first request.
    """

    def __init__(self, endpoint: str, key_env: str, timeout: float = 60.0):
        api_key = os.environ.get(key_env, "").strip()
        if not api_key:
            raise CredentialsError(
                f"environment variable {key_env} is not set; "
                "export it or use the mock transport"
            )
        self.endpoint = endpoint
        self._headers = {"Authorization": f"Bearer {api_key}"}
        self._client = httpx.Client(timeout=timeout)

    def complete(self, prompt: str, config: ProviderConfig) -> str:
        body = {
            "model": config.model,
            "prompt": prompt,
            "temperature": config.temperature,
            "top_p": config.top_p,
        }
        try:
            response = self._client.post(self.endpoint, json=body, headers=self._headers)
        except httpx.HTTPError as exc:
            raise TransportError(f"request failed: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransportError(f"status {response.status_code}")
        if response.status_code != 200:
            raise ProviderError(
                f"status {response.status_code}: {response.text[:200]}"
            )
        try:
            text = response.json()["text"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise TransportError(f"malformed response body: {exc}") from exc
        return text


# Word inventory for mock translations. Real MSA vocabulary so downstream
# tokenization and diacritic handling see realistic shapes.
_MOCK_WORDS = (
    "يظهر", "رجل", "امرأة", "طفل", "كلب", "سيارة", "يمشي", "يجري", "يجلس",
    "يقف", "المشهد", "الصورة", "على", "في", "نحو", "اليسار", "اليمين",
    "يتحدث", "يلعب", "الكرة", "الطاولة", "البيت", "الشارع", "ثم", "بسرعة",
    "ببطء", "الرجل", "المرأة", "الفتاة", "الولد", "يحمل", "ينظر", "الباب",
    "النافذة", "تبدأ", "يخرج", "يدخل", "الماء", "الشجرة", "الضوء",
)

_MOCK_DIACRITICS = ("َ", "ُ", "ِ", "ّ", "ْ")

_PROMPT_CAPTION_RE = re.compile(r"The English caption: (.*)$", re.MULTILINE)


class MockTransport:
    """Deterministic offline stand-in for a model API.

    The response is a pure function of ``(seed, prompt)``. Translation
    prompts get pseudo-Arabic built from a fixed word list, with controlled
    rates of diacritics, loanwords, boilerplate suffixes, and truncated
    output so the detector has something to find. Judge prompts get a
    well-formed ``FLAGS:`` line (or garbage, at ``malformed_flags_rate``).
    """

    def __init__(
        self,
        seed: int = 0,
        responses: Optional[Mapping[str, str]] = None,
        fail_times: int = 0,
        malformed_flags_rate: float = 0.0,
    ):
        self.seed = seed
        self.responses = dict(responses or {})
        self.fail_times = fail_times
        self.malformed_flags_rate = malformed_flags_rate
        self.calls: List[str] = []
        self._lock = threading.Lock()

    def _rng(self, prompt: str) -> random.Random:
        digest = hashlib.sha256(f"{self.seed}:{prompt}".encode("utf-8")).digest()
        return random.Random(digest)

    def complete(self, prompt: str, config: ProviderConfig) -> str:
        with self._lock:
            self.calls.append(prompt)
            if self.fail_times > 0:
                self.fail_times -= 1
                raise TransportError("injected failure")
        if prompt in self.responses:
            return self.responses[prompt]
        rng = self._rng(prompt)
        if "FLAGS:" in prompt:
            return self._judge_response(rng)
        return self._translation_response(prompt, rng)

    def _translation_response(self, prompt: str, rng: random.Random) -> str:
        match = _PROMPT_CAPTION_RE.search(prompt)
        caption = match.group(1).strip() if match else prompt
        source_len = max(len(caption.split()), 1)
        if rng.random() < 0.04 and source_len >= 4:
            n_words = 1  # truncated output, well under any length ratio
        else:
            n_words = max(2, min(12, round(source_len * 0.75)))
        words = [rng.choice(_MOCK_WORDS) for _ in range(n_words)]
        if "camera" in caption.lower():
            words[rng.randrange(len(words))] = rng.choice(("كاميرا", "الكاميرا"))
        if rng.random() < 0.28:
            for i in range(len(words)):
                if rng.random() < 0.5:
                    word = words[i]
                    pos = rng.randrange(1, len(word) + 1)
                    words[i] = word[:pos] + rng.choice(_MOCK_DIACRITICS) + word[pos:]
        text = " ".join(words) + "."
        if rng.random() < 0.06:
            text = text[:-1] + " باللغة العربية."
        return text

    def _judge_response(self, rng: random.Random) -> str:
        if rng.random() < self.malformed_flags_rate:
            return rng.choice(
                (
                    "The translation looks mostly fine to me.",
                    "FLAGS these: lexical and also something else",
                    "flags=lexical;loanword",
                )
            )
        picked = [
            token
            for token, rate in (
                ("lexical", 0.05),
                ("literal", 0.05),
                ("hallucination", 0.02),
                ("tense_shift", 0.04),
                ("loanword", 0.06),
                ("diacritics", 0.08),
            )
            if rng.random() < rate
        ]
        if not picked:
            return "FLAGS: none"
        return "FLAGS: " + ",".join(picked)


class ProviderClient:
    """Single entry point for model calls: cache, limits, retries."""

    def __init__(
        self,
        transport,
        config: ProviderConfig,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.transport = transport
        self.config = config
        self._sleep = sleep
        self._semaphore = threading.BoundedSemaphore(config.max_parallel)
        self._limiter = RateLimiter(
            config.rate_limit_requests,
            config.rate_limit_window_seconds,
            clock=clock,
            sleep=sleep,
        )
        self._cache_dir: Optional[Path] = None
        if config.cache_dir is not None:
            self._cache_dir = Path(config.cache_dir)
            self._cache_dir.mkdir(parents=True, exist_ok=True)

    def _cache_path(self, prompt: str) -> Optional[Path]:
        if self._cache_dir is None:
            return None
        return self._cache_dir / (self.config.cache_key(prompt) + ".txt")

    def _cache_read(self, prompt: str) -> Optional[str]:
        path = self._cache_path(prompt)
        if path is None:
            return None
        try:
            return path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        except (OSError, UnicodeDecodeError) as exc:
            logger.warning("unreadable cache entry %s (%s); refetching", path, exc)
            return None

    def _cache_write(self, prompt: str, text: str) -> None:
        path = self._cache_path(prompt)
        if path is None:
            return
        tmp = path.with_name(path.name + f".tmp{os.getpid()}.{threading.get_ident()}")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)

    def complete(self, prompt: str, use_cache: bool = True) -> str:
        if use_cache:
            cached = self._cache_read(prompt)
            if cached is not None:
                return cached
        with self._semaphore:
            text = self._complete_with_retry(prompt)
        self._cache_write(prompt, text)
        return text

    def _complete_with_retry(self, prompt: str) -> str:
        last_error: Optional[Exception] = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                delay = min(
                    self.config.backoff_base_seconds * (2 ** (attempt - 1)),
                    self.config.backoff_cap_seconds,
                )
                self._sleep(delay)
            self._limiter.acquire()
            try:
                text = self.transport.complete(prompt, self.config)
            except TransportError as exc:
                last_error = exc
                logger.warning(
                    "attempt %d/%d failed: %s",
                    attempt + 1,
                    self.config.max_attempts,
                    exc,
                )
                continue
            if not text or not text.strip():
                last_error = TransportError("empty response")
                logger.warning(
                    "attempt %d/%d returned empty output", attempt + 1,
                    self.config.max_attempts,
                )
                continue
            return text
        raise TransportError(
            f"giving up after {self.config.max_attempts} attempts: {last_error}"
        )
