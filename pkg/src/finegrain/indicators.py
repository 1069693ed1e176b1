"""Technical indicators for the fine-grained Technical agent, plus the coarse raw price window.

All indicators work on closes up to and including the as-of date and return
NaN (the missing-marker) when history is too short.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .marketdata import PriceSeries
from .util import MISSING, parse_date, shift_date_months

ROC_DAYS = (5, 10, 20, 30)
ROC_MONTHS = (1, 3, 6, 12)
WINDOW_DAYS = 252


def _closes(series: PriceSeries, asof) -> np.ndarray:
    return series.closes[: series.count_asof(asof)]


def roc(series: PriceSeries, asof, *, days: int | None = None, months: int | None = None) -> float:
    """Rate of change in percent over ``days`` bars or ``months`` calendar months.

    The month variant compares against the close on the same calendar day
    ``months`` earlier, rolling back to the nearest prior bar on holidays.
    """
    if (days is None) == (months is None):
        raise TypeError("pass exactly one of days= or months=")
    k = series.count_asof(asof)
    if k == 0:
        return MISSING
    p_now = series.closes[k - 1]
    if days is not None:
        if k <= days:
            return MISSING
        p_ref = series.closes[k - 1 - days]
    else:
        anchor = shift_date_months(series.dates[k - 1].item(), -months)
        j = series.count_asof(anchor)
        if j == 0:
            return MISSING
        p_ref = series.closes[j - 1]
    return 100.0 * (p_now / p_ref - 1.0)


def ema(values, span: int) -> np.ndarray:
    """Recursive EMA, alpha = 2/(span+1), seeded with the first value."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("ema of empty input")
    if span < 1:
        raise ValueError("span must be >= 1")
    a = 2.0 / (span + 1.0)
    y, _ = lfilter([a], [1.0, a - 1.0], x, zi=[(1.0 - a) * x[0]])
    return y


def macd(series: PriceSeries, asof) -> tuple[float, float, float]:
    """(MACD, signal, histogram), each divided by the as-of close."""
    c = _closes(series, asof)
    if len(c) < 26:
        return MISSING, MISSING, MISSING
    line = ema(c, 12) - ema(c, 26)
    signal = ema(line, 9)
    p = c[-1]
    m, s = line[-1] / p, signal[-1] / p
    return float(m), float(s), float(m - s)


def bollinger_z(series: PriceSeries, asof) -> float:
    """(P - mean20) / std20 over the trailing 20 closes (population std)."""
    c = _closes(series, asof)
    if len(c) < 20:
        return MISSING
    w = c[-20:]
    mu = w.mean()
    sd = w.std()
    if sd <= 1e-12 * abs(mu):
        return MISSING
    return float((w[-1] - mu) / sd)


def rsi(series: PriceSeries, asof, period: int = 14) -> float:
    """Wilder RSI: simple-average seed over the first ``period`` moves, then alpha = 1/period."""
    c = _closes(series, asof)
    if len(c) < period + 1:
        return MISSING
    d = np.diff(c)
    gains = np.where(d > 0, d, 0.0)
    losses = np.where(d < 0, -d, 0.0)
    avg_gain = gains[:period].mean()
    avg_loss = losses[:period].mean()
    for g, l in zip(gains[period:], losses[period:]):
        avg_gain = (avg_gain * (period - 1) + g) / period
        avg_loss = (avg_loss * (period - 1) + l) / period
    if avg_loss == 0 and avg_gain == 0:
        return 50.0
    if avg_loss == 0:
        return 100.0
    if avg_gain == 0:
        return 0.0
    return float(100.0 - 100.0 / (1.0 + avg_gain / avg_loss))


def _pct_k(window: np.ndarray) -> float:
    hi, lo = window.max(), window.min()
    if hi == lo:
        return 50.0
    return float(100.0 * (window[-1] - lo) / (hi - lo))


def stochastic_kdj(series: PriceSeries, asof) -> tuple[float, float, float]:
    """%K over 9 closes, %D = 3-day SMA of %K, J = 3D - 2K. Flat range gives %K = 50."""
    c = _closes(series, asof)
    if len(c) < 11:
        return MISSING, MISSING, MISSING
    ks = [_pct_k(c[len(c) - 9 - i: len(c) - i]) for i in (2, 1, 0)]
    k = ks[-1]
    d = sum(ks) / 3.0
    return k, d, 3.0 * d - 2.0 * k


@dataclass
class TechnicalFeatureSet:
    roc_days: dict = field(default_factory=dict)
    roc_months: dict = field(default_factory=dict)
    bollinger_z: float = MISSING
    macd_norm: float = MISSING
    signal_norm: float = MISSING
    hist_norm: float = MISSING
    rsi: float = MISSING
    pct_k: float = MISSING
    pct_d: float = MISSING
    j: float = MISSING

    def as_dict(self) -> dict:
        out = {f"roc_{n}d": v for n, v in self.roc_days.items()}
        out.update({f"roc_{n}m": v for n, v in self.roc_months.items()})
        for name in ("bollinger_z", "macd_norm", "signal_norm", "hist_norm", "rsi", "pct_k", "pct_d", "j"):
            out[name] = getattr(self, name)
        return out


def fine_features(series: PriceSeries, asof) -> TechnicalFeatureSet:
    m, s, h = macd(series, asof)
    k, d, j = stochastic_kdj(series, asof)
    return TechnicalFeatureSet(
        roc_days={n: roc(series, asof, days=n) for n in ROC_DAYS},
        roc_months={n: roc(series, asof, months=n) for n in ROC_MONTHS},
        bollinger_z=bollinger_z(series, asof),
        macd_norm=m, signal_norm=s, hist_norm=h,
        rsi=rsi(series, asof),
        pct_k=k, pct_d=d, j=j,
    )


@dataclass(frozen=True)
class RawPriceWindow:
    closes: tuple  # most recent first
    short_history: bool


def coarse_window(series: PriceSeries, asof, length: int = WINDOW_DAYS) -> RawPriceWindow:
    c = _closes(series, asof)
    if len(c) == 0:
        raise ValueError(f"{series.ticker}: no closes on or before {parse_date(asof)}")
    tail = c[-length:]
    return RawPriceWindow(tuple(float(x) for x in tail[::-1]), len(tail) < length)
