"""Token corpora and the log-odds ratio with an informative Dirichlet prior."""

from __future__ import annotations

import csv
import io
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)

DEFAULT_STOPWORDS = frozenset(
    "a an the and or of to in on for with by at from as is are be was were it its this that these those "
    "not no but if than then so very more most less".split()
)


def tokenize(text: str, stopwords=DEFAULT_STOPWORDS) -> list[str]:
    """Lower-cased word tokens split on whitespace and punctuation."""
    return [t for t in _TOKEN.findall(text.lower()) if t not in stopwords]


@dataclass(frozen=True)
class TokenCorpus:
    label: str
    counts: dict

    def __post_init__(self):
        bad = [t for t, c in self.counts.items() if c < 1 or int(c) != c]
        if bad:
            raise ValueError(f"counts must be positive integers: {bad[:5]}")

    @property
    def total(self) -> int:
        return int(sum(self.counts.values()))

    @classmethod
    def from_texts(cls, label: str, texts, stopwords=DEFAULT_STOPWORDS) -> "TokenCorpus":
        c = Counter()
        for t in texts:
            c.update(tokenize(t, stopwords))
        return cls(label, dict(c))

    def add(self, other: "TokenCorpus") -> "TokenCorpus":
        c = Counter(self.counts)
        c.update(other.counts)
        return TokenCorpus(self.label, dict(c))


@dataclass(frozen=True)
class LogOddsResult:
    tokens: tuple
    delta: np.ndarray
    variance: np.ndarray
    z: np.ndarray
    labels: tuple = ("i", "j")

    def __getitem__(self, token: str) -> tuple[float, float, float]:
        k = self.tokens.index(token)
        return float(self.delta[k]), float(self.variance[k]), float(self.z[k])


def log_odds(ci: TokenCorpus, cj: TokenCorpus, prior_scale: float = 0.01) -> LogOddsResult:
    """Per-token log-odds difference of corpus i over corpus j, smoothed by a uniform Dirichlet prior."""
    if ci.total == 0 or cj.total == 0:
        raise ValueError("both corpora must be non-empty")
    if prior_scale <= 0:
        raise ValueError("prior_scale must be positive")
    vocab = tuple(sorted(set(ci.counts) | set(cj.counts)))
    if len(vocab) < 2:
        raise ValueError("log-odds needs at least two distinct tokens across the corpora")
    a_w = prior_scale
    a_0 = a_w * len(vocab)

    def side(c: TokenCorpus):
        y = np.array([c.counts.get(w, 0) for w in vocab], dtype=float) + a_w
        return np.log(y) - np.log(c.total + a_0 - y), y

    li, yi = side(ci)
    lj, yj = side(cj)
    delta = li - lj
    var = 1.0 / yi + 1.0 / yj
    return LogOddsResult(vocab, delta, var, delta / np.sqrt(var), (ci.label, cj.label))


def top_k(result: LogOddsResult, k: int = 10) -> tuple[list, list]:
    """(tokens most typical of corpus i, tokens most typical of corpus j), by z, ties in token order."""
    idx = range(len(result.tokens))
    side_i = sorted(idx, key=lambda t: (-result.z[t], result.tokens[t]))
    side_j = sorted(idx, key=lambda t: (result.z[t], result.tokens[t]))
    pick = lambda order: [(result.tokens[t], float(result.z[t])) for t in order[:k]]  # noqa: E731
    return pick(side_i), pick(side_j)


def log_odds_csv(result: LogOddsResult) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["token", "delta", "variance", "z"])
    order = sorted(range(len(result.tokens)), key=lambda t: (-result.z[t], result.tokens[t]))
    for t in order:
        wr.writerow([result.tokens[t], repr(float(result.delta[t])), repr(float(result.variance[t])),
                     repr(float(result.z[t]))])
    return buf.getvalue()
