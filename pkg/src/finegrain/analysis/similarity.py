"""Embedding similarity between Level-1 analyst rationales and the sector thesis built on them."""

from __future__ import annotations

import hashlib
import json
import statistics
from dataclasses import dataclass

import numpy as np

from ..agents.reports import LEVEL1_ROLES
from .text import tokenize


class OfflineEmbedder:
    """Deterministic pseudo-embeddings for tests and offline runs.

    Each token maps to a Gaussian vector seeded by its hash; a text embeds as
    the normalised sum of its token vectors, so shared wording raises cosine
    similarity. Texts without tokens get a vector seeded by the whole string.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def _gauss(self, key: str) -> np.ndarray:
        if key not in self._cache:
            h = hashlib.sha256(f"{self.seed}\x00{key}".encode("utf-8")).digest()
            self._cache[key] = np.random.default_rng(int.from_bytes(h[:8], "little")).standard_normal(self.dim)
        return self._cache[key]

    def embed(self, texts) -> np.ndarray:
        rows = []
        for text in texts:
            toks = tokenize(text, stopwords=frozenset())
            v = np.zeros(self.dim)
            for t in toks:
                v += self._gauss("tok:" + t)
            if not toks or not np.any(v):
                v = self._gauss("txt:" + text).copy()
            rows.append(v / np.linalg.norm(v))
        return np.array(rows).reshape(len(rows), self.dim)


def embed(texts, backend) -> np.ndarray:
    """Unit-length vectors, one per text, from any object with ``embed(texts)``."""
    vecs = np.asarray(backend.embed(list(texts)), dtype=float)
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("backend returned a zero vector")
    return vecs / norms


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine of a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class SimilarityReport:
    rows: dict  # role -> {"fine": median, "coarse": median, "diff": fine - coarse}
    counts: dict  # role -> {granularity: pairs}

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "counts": self.counts}, sort_keys=True, indent=1) + "\n"


def _groups(source) -> list[list]:
    """Normalise a store, a list of records, or a list of either into record groups."""
    if hasattr(source, "records"):
        return [source.records()]
    items = list(source)
    if items and all(hasattr(x, "role") for x in items):
        return [items]
    out = []
    for x in items:
        out += _groups(x)
    return out


def similarity_pairs(source, embedder) -> dict:
    """(role, granularity) -> cosines, one per (month, ticker, trial) holding both texts.

    Pairs are formed within each record group (one group per transcript store),
    so runs under different masks never pair with each other.
    """
    groups = _groups(source)
    texts = sorted({r.report.reason for g in groups for r in g if r.role == "sector" or r.role in LEVEL1_ROLES})
    vec = dict(zip(texts, embed(texts, embedder))) if texts else {}
    out: dict = {}
    for records in groups:
        sector, level1 = {}, {}
        for r in records:
            key = (r.month, r.ticker, r.granularity, r.trial)
            if r.role == "sector":
                sector[key] = r.report.reason
            elif r.role in LEVEL1_ROLES:
                level1.setdefault(r.role, {})[key] = r.report.reason
        for role in LEVEL1_ROLES:
            for key, text in sorted(level1.get(role, {}).items()):
                if key in sector:
                    out.setdefault((role, key[2]), []).append(cosine(vec[text], vec[sector[key]]))
    return out


def propagation_report(source, embedder) -> SimilarityReport:
    """Median similarity of each analyst's rationale to the sector thesis, per granularity."""
    pairs = similarity_pairs(source, embedder)
    rows, counts = {}, {}
    for role in LEVEL1_ROLES:
        meds = {g: statistics.median(pairs[(role, g)]) for g in ("fine", "coarse") if (role, g) in pairs}
        if not meds:
            continue  # role ablated everywhere
        row = dict(meds)
        if len(meds) == 2:
            row["diff"] = meds["fine"] - meds["coarse"]
        rows[role] = row
        counts[role] = {g: len(pairs[(role, g)]) for g in meds}
    return SimilarityReport(rows, counts)
