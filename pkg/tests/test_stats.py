import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import mannwhitneyu

from finegrain.analysis.stats import mann_whitney_u, stars


def brute_force_p(x, y):
    """Two-sided exact p by enumerating every relabelling of the pooled sample (midranks for ties)."""
    pooled = list(x) + list(y)
    N, n = len(pooled), len(x)
    order = sorted(pooled)
    rank = {v: (order.index(v) + 1 + N - order[::-1].index(v)) / 2 for v in pooled}
    ranks = [rank[v] for v in pooled]
    center = n * (N + 1) / 2
    obs = abs(sum(ranks[:n]) - center)
    hits = total = 0
    for idx in itertools.combinations(range(N), n):
        total += 1
        hits += abs(sum(ranks[i] for i in idx) - center) >= obs - 1e-9
    return hits / total


def test_fully_separated_three_by_three():
    r = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert r.method == "exact" and r.u == 0.0 and r.p == pytest.approx(0.1)
    assert r.stars == "ns"


def test_identical_samples():
    r = mann_whitney_u([1.0, 1.0, 1.0], [1.0, 1.0])
    assert r.p == 1.0
    big = mann_whitney_u([2.0] * 10, [2.0] * 12)
    assert big.method == "normal" and big.p == 1.0


@pytest.mark.parametrize("seed", range(25))
def test_exact_matches_enumeration_with_ties(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 7)), int(rng.integers(1, 8))
    x = rng.integers(0, 5, n).astype(float)
    y = rng.integers(0, 5, m).astype(float)
    assert mann_whitney_u(x, y).p == pytest.approx(brute_force_p(x, y), abs=1e-12)


@pytest.mark.parametrize("seed", range(25))
def test_exact_matches_scipy_without_ties(seed):
    rng = np.random.default_rng(100 + seed)
    n, m = int(rng.integers(2, 8)), int(rng.integers(2, 12))
    x, y = rng.normal(size=n), rng.normal(0.5, 1, size=m)
    ours = mann_whitney_u(x, y)
    ref = mannwhitneyu(x, y, alternative="two-sided", method="exact")
    assert ours.u == ref.statistic and ours.p == pytest.approx(ref.pvalue, rel=1e-10)


@pytest.mark.parametrize("seed", range(25))
def test_normal_matches_scipy(seed):
    rng = np.random.default_rng(200 + seed)
    n, m = int(rng.integers(8, 40)), int(rng.integers(8, 40))
    x = np.round(rng.normal(size=n), 1)
    y = np.round(rng.normal(0.3, 1, size=m), 1)
    ours = mann_whitney_u(x, y)
    ref = mannwhitneyu(x, y, alternative="two-sided", method="asymptotic", use_continuity=True)
    assert ours.method == "normal"
    assert ours.u == ref.statistic and ours.p == pytest.approx(ref.pvalue, rel=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=12), st.lists(st.integers(0, 6), min_size=1, max_size=12))
def test_u_statistics_sum_and_symmetry(x, y):
    a, b = mann_whitney_u(x, y), mann_whitney_u(y, x)
    assert a.u + b.u == len(x) * len(y)
    assert a.p == pytest.approx(b.p, abs=1e-12)
    assert 0.0 < a.p <= 1.0


def test_null_rejection_rate_is_nominal():
    rng = np.random.default_rng(7)
    for n in (5, 15):
        rejected = sum(mann_whitney_u(rng.normal(size=n), rng.normal(size=n)).p < 0.05 for _ in range(2000))
        assert rejected / 2000 < 0.065


def test_power_against_a_shift():
    rng = np.random.default_rng(8)
    assert mann_whitney_u(rng.normal(size=30), rng.normal(1.5, 1, size=30)).p < 1e-4


def test_star_thresholds():
    assert [stars(p) for p in (5e-5, 5e-4, 5e-3, 0.03, 0.05, 0.5)] == ["****", "***", "**", "*", "ns", "ns"]
    assert stars(math.nan) == ""


def test_bad_input():
    with pytest.raises(ValueError):
        mann_whitney_u([], [1.0])
    with pytest.raises(ValueError):
        mann_whitney_u([math.nan], [1.0])
