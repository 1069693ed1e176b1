"""Mann-Whitney U test with midrank ties: exact enumeration for small samples, normal approximation otherwise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

EXACT_BELOW = 8  # exact distribution when either sample is smaller than this


def stars(p: float) -> str:
    if math.isnan(p):
        return ""
    if p < 1e-4:
        return "****"
    if p < 1e-3:
        return "***"
    if p < 1e-2:
        return "**"
    if p < 0.05:
        return "*"
    return "ns"


@dataclass(frozen=True)
class UTestResult:
    u: float  # U of the first sample
    p: float  # two-sided
    method: str  # "exact" or "normal"
    n: int
    m: int

    @property
    def stars(self) -> str:
        return stars(self.p)


def _exact_p(doubled: np.ndarray, n: int, t_obs: int) -> float:
    """P(|T - n(N+1)| >= |t_obs - n(N+1)|) where T is the doubled rank sum of a random n-subset."""
    N = len(doubled)
    k = min(n, N - n)
    # choosing the complement flips T around its mean, so the two-sided tail is unchanged
    if k != n:
        t_obs = int(doubled.sum()) - t_obs
    top = int(np.sort(doubled)[::-1][:k].sum())
    counts = np.zeros((k + 1, top + 1))
    counts[0, 0] = 1.0
    for r in doubled:
        r = int(r)
        for j in range(k, 0, -1):
            counts[j, r:] += counts[j - 1, : top + 1 - r]
    dist = counts[k]
    center = k * (N + 1)
    dev = abs(t_obs - center)
    sums = np.arange(top + 1)
    tail = dist[np.abs(sums - center) >= dev].sum()
    return float(min(1.0, tail / dist.sum()))


def mann_whitney_u(x, y) -> UTestResult:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("samples contain non-finite values")
    allv = np.concatenate([x, y])
    ranks = rankdata(allv)  # midranks
    doubled = np.rint(2 * ranks).astype(np.int64)
    t_obs = int(doubled[:n].sum())
    u = t_obs / 2.0 - n * (n + 1) / 2.0
    N = n + m
    if min(n, m) < EXACT_BELOW:
        return UTestResult(u, _exact_p(doubled, n, t_obs), "exact", n, m)
    _, tie_counts = np.unique(allv, return_counts=True)
    tie_term = float(((tie_counts ** 3) - tie_counts).sum()) / (N * (N - 1))
    var = n * m / 12.0 * ((N + 1) - tie_term)
    if var <= 0:
        return UTestResult(u, 1.0, "normal", n, m)
    z = (abs(u - n * m / 2.0) - 0.5) / math.sqrt(var)
    return UTestResult(u, float(min(1.0, math.erfc(z / math.sqrt(2.0)))), "normal", n, m)
