import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import series_from_closes
from finegrain.indicators import (bollinger_z, coarse_window, ema, fine_features, macd, roc, rsi,
                                  stochastic_kdj)


def random_series(rng, n=300):
    closes = 100 * np.exp(np.cumsum(rng.normal(0, 0.02, n)))
    return series_from_closes(np.round(closes, 4))


def test_ema_matches_recursion(rng):
    x = rng.normal(size=50)
    assert np.allclose(ema(x, 12), oracles.ema_loop(list(x), 12), rtol=0, atol=1e-12)
    assert ema([5.0], 3)[0] == 5.0


def test_ema_rejects_bad_input():
    with pytest.raises(ValueError):
        ema([], 3)
    with pytest.raises(ValueError):
        ema([1.0], 0)


@pytest.mark.parametrize("seed", range(10))
def test_indicators_match_loops(seed):
    rng = np.random.default_rng(seed)
    s = random_series(rng)
    asof = s.dates[-1].item() - dt.timedelta(days=int(rng.integers(0, 40)))
    c = oracles.closes_upto(s, asof)
    for got, want in zip(macd(s, asof), oracles.macd_loop(c)):
        assert oracles.same(got, want, 1e-9)
    assert oracles.same(bollinger_z(s, asof), oracles.bollinger_loop(c), 1e-9)
    assert oracles.same(rsi(s, asof), oracles.rsi_loop(c), 1e-9)
    for got, want in zip(stochastic_kdj(s, asof), oracles.kdj_loop(c)):
        assert oracles.same(got, want, 1e-9)
    for n in (5, 10, 20):
        assert oracles.same(roc(s, asof, days=n), oracles.roc_days_loop(c, n), 1e-9)
    for m in (1, 3, 6, 12):
        assert oracles.same(roc(s, asof, months=m), oracles.roc_months_loop(s, asof, m), 1e-9)


def test_flat_series_degenerate_values():
    s = series_from_closes([100.0] * 60)
    asof = s.dates[-1].item()
    assert math.isnan(bollinger_z(s, asof))
    assert rsi(s, asof) == 50.0
    assert stochastic_kdj(s, asof) == (50.0, 50.0, 50.0)
    assert macd(s, asof) == (0.0, 0.0, 0.0)
    assert roc(s, asof, days=5) == 0.0


def test_monotone_rsi_extremes():
    up = series_from_closes(list(range(1, 40)))
    down = series_from_closes(list(range(40, 1, -1)))
    assert rsi(up, up.dates[-1].item()) == 100.0
    assert rsi(down, down.dates[-1].item()) == 0.0


def test_short_history_is_missing():
    s = series_from_closes([10.0 + i for i in range(10)])
    asof = s.dates[-1].item()
    f = fine_features(s, asof)
    assert all(math.isnan(v) for v in (f.macd_norm, f.signal_norm, f.hist_norm, f.bollinger_z, f.rsi, f.pct_k))
    assert math.isnan(f.roc_days[20]) and not math.isnan(f.roc_days[5])
    assert math.isnan(f.roc_months[12])


def test_before_first_bar_is_missing():
    s = series_from_closes([10.0] * 30)
    early = s.dates[0].item() - dt.timedelta(days=1)
    assert math.isnan(roc(s, early, days=1))
    with pytest.raises(ValueError):
        coarse_window(s, early)


def test_roc_needs_exactly_one_horizon():
    s = series_from_closes([1.0, 2.0])
    with pytest.raises(TypeError):
        roc(s, s.dates[-1].item())
    with pytest.raises(TypeError):
        roc(s, s.dates[-1].item(), days=1, months=1)


def test_coarse_window_order_and_flag():
    s = series_from_closes([float(i) for i in range(1, 301)])
    w = coarse_window(s, s.dates[-1].item())
    assert len(w.closes) == 252 and w.closes[0] == 300.0 and w.closes[-1] == 49.0
    assert not w.short_history
    short = coarse_window(s, s.dates[99].item())
    assert len(short.closes) == 100 and short.short_history


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1.0, 1000.0), min_size=30, max_size=80), st.floats(0.01, 100.0))
def test_ratio_indicators_are_scale_invariant(closes, k):
    a = series_from_closes(closes)
    b = series_from_closes([c * k for c in closes])
    asof = a.dates[-1].item()
    fa, fb = fine_features(a, asof), fine_features(b, asof)
    for x, y in zip(fa.as_dict().values(), fb.as_dict().values()):
        if math.isnan(x):
            assert math.isnan(y)
        else:
            assert y == pytest.approx(x, rel=1e-6, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1.0, 1000.0), min_size=16, max_size=60))
def test_oscillator_bounds(closes):
    s = series_from_closes(closes)
    asof = s.dates[-1].item()
    r = rsi(s, asof)
    assert 0.0 <= r <= 100.0
    k, d, _ = stochastic_kdj(s, asof)
    assert 0.0 <= k <= 100.0 and 0.0 <= d <= 100.0
