"""Chat backends: scripted (deterministic), replay (from transcripts) and live (HTTP).

Every backend exposes ``send(system_prompt, user_prompt, context) -> str``.
``context`` carries the explicit request key so results never depend on call order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

from .reports import MACRO_DIMENSIONS, ROLE_SPECS

log = logging.getLogger(__name__)


class BackendError(RuntimeError):
    """The backend could not produce an answer (network, HTTP status, missing replay record)."""


@dataclass(frozen=True)
class RequestContext:
    role: str
    month: str
    granularity: str
    ticker: str | None = None
    trial: int = 0
    attempt: int = 0  # 0 = first prompt, 1 = re-prompt after a parse failure


def prompt_hash(system_prompt: str, user_prompt: str) -> str:
    return hashlib.sha256(f"{system_prompt}\x00{user_prompt}".encode("utf-8")).hexdigest()


# --- scripted ---------------------------------------------------------------

# Neutral vocabulary for synthetic rationales. It deliberately avoids role
# names so that echoed text cannot smuggle an excluded role into later prompts.
VOCAB = (
    "momentum", "reversal", "overbought", "oversold", "breakout", "volatility", "trend", "support",
    "resistance", "divergence", "margin", "profitability", "valuation", "leverage", "liquidity",
    "cash", "growth", "dividend", "efficiency", "inventory", "demand", "pricing", "expansion",
    "restructuring", "governance", "catalyst", "headwind", "tailwind", "earnings", "guidance",
    "outperform", "underperform", "defensive", "cyclical", "yield", "inflation", "rates", "currency",
    "sentiment", "risk", "upside", "downside", "stable", "deteriorating", "improving", "robust",
)


class HashScript:
    """Deterministic pseudo-answers derived from the prompt hash.

    Scores are read from hash bytes; the rationale mixes words echoed from the
    prompt (when present in ``VOCAB``) with hash-chosen words, which gives the
    text analyses something to measure. ``noise`` sets the probability of
    deliberately malformed output, used to exercise the retry path.
    """

    def __init__(self, n_words: int = 8, noise: float = 0.0, seed: int = 0):
        self.n_words = n_words
        self.noise = noise
        self.seed = seed

    def _stream(self, ctx: RequestContext, h: str) -> np.random.Generator:
        key = f"{self.seed}|{ctx.role}|{ctx.ticker}|{ctx.month}|{ctx.granularity}|{h}"
        return np.random.default_rng(int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little"))

    def words(self, rng, user_prompt: str) -> str:
        lower = user_prompt.lower()
        echoed = [w for w in VOCAB if w in lower]
        picks = []
        for i in range(self.n_words):
            pool = echoed if (echoed and i % 2 == 0) else VOCAB
            picks.append(pool[int(rng.integers(len(pool)))])
        return " ".join(picks)

    def __call__(self, ctx: RequestContext, h: str, system_prompt: str, user_prompt: str) -> str:
        rng = self._stream(ctx, h)
        if ctx.attempt == 0 and self.noise > 0 and rng.random() < self.noise:
            return "I am unable to give a score in the requested format."
        spec = ROLE_SPECS[ctx.role]
        text = self.words(rng, user_prompt)
        if spec.nested:
            metrics = {k: {"label": VOCAB[int(rng.integers(len(VOCAB)))],
                           "score": int(rng.integers(spec.low, spec.high + 1))} for k in MACRO_DIMENSIONS}
            obj = {"metrics": metrics, spec.text_key: text}
        else:
            obj = {k: int(rng.integers(spec.low, spec.high + 1)) for k in spec.score_keys}
            obj[spec.text_key] = text
        body = json.dumps(obj, ensure_ascii=False)
        # some answers come wrapped in prose or a code fence, as real models do
        style = int(rng.integers(3))
        if style == 1:
            return f"Here is my assessment.\n```json\n{body}\n```"
        if style == 2:
            return f"{body}\nLet me know if more detail is needed."
        return body


class ForesightScript:
    """Scores the PM by the realised next-month return: the best stock gets 100, the worst 0.

    ``forward`` maps month -> {ticker: realised return}. With ``reverse`` the
    ranking is inverted. Other roles fall through to ``base``. Useful as a
    known-answer oracle for the backtest, never as a strategy.
    """

    def __init__(self, forward: dict, reverse: bool = False, base=None):
        self.forward = forward
        self.reverse = reverse
        self.base = base or HashScript()

    def __call__(self, ctx: RequestContext, h: str, system_prompt: str, user_prompt: str) -> str:
        if ctx.role != "pm":
            return self.base(ctx, h, system_prompt, user_prompt)
        return json.dumps({"final_score": self.score(ctx.month, ctx.ticker), "reason": "foresight ranking"})

    def score(self, month: str, ticker: str) -> int:
        rets = self.forward[month]
        order = sorted(rets, key=lambda t: (rets[t], t), reverse=self.reverse)
        n = len(order)
        return 50 if n == 1 else round(100 * order.index(ticker) / (n - 1))


class ScriptedBackend:
    """Pure function of (role, ticker, month, granularity, prompt hash); no I/O."""

    mode = "scripted"

    def __init__(self, policy=None):
        self.policy = policy or HashScript()

    def send(self, system_prompt: str, user_prompt: str, context: RequestContext) -> str:
        return self.policy(context, prompt_hash(system_prompt, user_prompt), system_prompt, user_prompt)


class ReplayBackend:
    """Answers from a transcript directory written by ``TranscriptStore``.

    With ``strict`` the recorded prompts must match the new ones exactly.
    """

    mode = "scripted"

    def __init__(self, root, strict: bool = True):
        from .transcripts import TranscriptStore  # local import: transcripts imports reports only

        self.store = TranscriptStore(root)
        self.strict = strict

    def send(self, system_prompt: str, user_prompt: str, context: RequestContext) -> str:
        try:
            rec = self.store.load(context.month, context.role, context.ticker, context.granularity, context.trial)
        except FileNotFoundError as e:
            raise BackendError(f"no recorded answer for {context}") from e
        if context.attempt >= len(rec.exchanges):
            raise BackendError(f"no recorded attempt {context.attempt} for {context}")
        ex = rec.exchanges[context.attempt]
        if self.strict and (ex["system"] != system_prompt or ex["user"] != user_prompt):
            raise BackendError(f"prompt drift for {context}")
        return ex["output"]


class LiveBackend:
    """Chat-completions client with bounded concurrency and exponential backoff."""

    mode = "live"
    RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}

    def __init__(self, endpoint: str, model: str, api_key: str | None = None, *, temperature: float = 1.0,
                 max_retries: int = 3, backoff: float = 1.0, timeout: float = 60.0, max_concurrency: int = 4,
                 client: httpx.Client | None = None, sleep=time.sleep):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self.client = client or httpx.Client(timeout=timeout, headers=headers)
        self._slots = threading.BoundedSemaphore(max_concurrency)

    def request_body(self, system_prompt: str, user_prompt: str) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "system", "content": system_prompt}, {"role": "user", "content": user_prompt}],
            "temperature": self.temperature,
        }

    def send(self, system_prompt: str, user_prompt: str, context: RequestContext | None = None) -> str:
        body = self.request_body(system_prompt, user_prompt)
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self.client.post(self.endpoint, json=body)
            except httpx.HTTPError as e:
                last = e
                log.warning("chat request failed (%s), attempt %d", e, attempt + 1)
                continue
            if resp.status_code in self.RETRY_STATUS:
                last = BackendError(f"HTTP {resp.status_code}")
                log.warning("chat request got HTTP %d, attempt %d", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as e:
                raise BackendError(f"malformed chat response: {resp.text[:200]}") from e
        raise BackendError(f"gave up after {self.max_retries + 1} attempts: {last}")


class LiveEmbedder:
    """Embedding client for the same HTTP pattern; returns unit-normalised rows."""

    def __init__(self, endpoint: str, api_key: str | None = None, model: str = "text-embedding-3-small", *,
                 client: httpx.Client | None = None, timeout: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self.client = client or httpx.Client(timeout=timeout, headers=headers)

    def embed(self, texts) -> np.ndarray:
        texts = list(texts)
        resp = self.client.post(self.endpoint, json={"model": self.model, "input": texts})
        if resp.status_code >= 400:
            raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        data = sorted(resp.json()["data"], key=lambda d: d.get("index", 0))
        vecs = np.asarray([d["embedding"] for d in data], dtype=float)
        if vecs.shape[0] != len(texts):
            raise BackendError(f"expected {len(texts)} embeddings, got {vecs.shape[0]}")
        norms = np.linalg.norm(vecs, axis=1, keepdims=True)
        return vecs / np.where(norms == 0, 1.0, norms)


def load_backend(config: dict):
    """Backend from a config mapping: {"mode": "scripted"|"replay"|"live", ...}."""
    mode = config.get("mode", "scripted")
    if mode == "scripted":
        return ScriptedBackend(HashScript(n_words=config.get("n_words", 8), noise=config.get("noise", 0.0),
                                          seed=config.get("seed", 0)))
    if mode == "replay":
        return ReplayBackend(Path(config["dir"]), strict=config.get("strict", True))
    if mode == "live":
        import os

        key = os.environ.get(config.get("api_key_env", "OPENAI_API_KEY"))
        return LiveBackend(config["endpoint"], config["model"], key,
                           temperature=config.get("temperature", 1.0),
                           max_retries=config.get("max_retries", 3),
                           max_concurrency=config.get("max_concurrency", 4))
    raise ValueError(f"unknown backend mode {mode!r}")
