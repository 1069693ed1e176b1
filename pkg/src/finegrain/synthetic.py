"""Deterministic synthetic market used by tests, demos and the command line.

The generated repository has a Monday-Friday calendar, daily open/close
prices, mixed quarterly / semi-annual / annual filings with text excerpts,
ticker news and an 18-indicator monthly macro panel. Everything derives from
``seed`` through numpy's default generator, so two calls give identical data.
"""

from __future__ import annotations

import csv
import datetime as dt

import numpy as np

from .marketdata import (LINE_ITEMS, MACRO_INDICATORS, PERIOD_MONTHS, DataRepository, MacroSnapshot, NewsItem,
                         PriceBar, PriceSeries, StatementRecord, Ticker, TradingCalendar, dump_repository,
                         load_repository)
from .util import MISSING, add_months, month_end, month_of, month_range, parse_month, pct_change

SECTORS = ("Machinery", "Electronics", "Retail")
FILING_STYLES = ("quarterly", "semi-annual", "annual")

_TOPICS = ("expansion", "restructuring", "pricing", "demand", "inventory", "currency", "guidance", "dividend",
           "governance", "supply")
_TONES = ("improving", "stable", "deteriorating", "robust", "cautious", "volatile")


def business_days(first: dt.date, last: dt.date) -> list[dt.date]:
    days = []
    d = first
    while d <= last:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def _month_start(m: str) -> dt.date:
    y, mo = parse_month(m)
    return dt.date(y, mo, 1)


def _universe(n: int) -> tuple:
    return tuple(Ticker(f"{1001 + i}", SECTORS[i % len(SECTORS)]) for i in range(n))


def _prices(rng, code: str, days: list[dt.date]) -> PriceSeries:
    n = len(days)
    drift = rng.normal(0.0002, 0.0003)
    vol = rng.uniform(0.008, 0.02)
    rets = rng.normal(drift, vol, n)
    closes = 1000.0 * np.exp(np.cumsum(rets)) * rng.uniform(0.5, 2.0)
    gaps = rng.normal(0.0, vol / 3, n)
    opens = np.empty(n)
    opens[0] = closes[0] * (1 + gaps[0])
    opens[1:] = closes[:-1] * (1 + gaps[1:])
    bars = [PriceBar(d, round(float(o), 2), round(float(c), 2)) for d, o, c in zip(days, opens, closes)]
    return PriceSeries.from_bars(code, bars)


def _period_plan(style: str, first_fy: int, last_fy: int) -> list[tuple[str, dt.date]]:
    """(period_type, period_end) for fiscal years ending in March."""
    out = []
    for fy in range(first_fy, last_fy + 1):
        if style == "quarterly":
            ends = [f"{fy - 1}-06", f"{fy - 1}-09", f"{fy - 1}-12", f"{fy}-03"]
        elif style == "semi-annual":
            ends = [f"{fy - 1}-09", f"{fy}-03"]
        else:
            ends = [f"{fy}-03"]
        out += [(style, month_end(m)) for m in ends]
    return out


def _texts(rng, code: str, period_end: dt.date) -> dict:
    def pick(seq):
        return seq[int(rng.integers(len(seq)))]

    tag = f"period ended {period_end.isoformat()}"
    return {
        "overview": f"Company {code} reports {pick(_TONES)} {pick(_TOPICS)} for the {tag}.",
        "risks": f"Key exposure: {pick(_TOPICS)} risk, judged {pick(_TONES)}; watch {pick(_TOPICS)}.",
        "mdna": f"Management sees {pick(_TONES)} {pick(_TOPICS)} and {pick(_TOPICS)} in the {tag}.",
        "governance": f"Board review of {pick(_TOPICS)}; oversight {pick(_TONES)} ({code}, {period_end.year}).",
    }


def _statements(rng, code: str, style: str, first_fy: int, last_fy: int, last_day: dt.date) -> list:
    plan = _period_plan(style, first_fy, last_fy)
    shares = float(rng.integers(50, 500)) * 1e6
    annual_sales = rng.uniform(2e11, 2e12)
    growth = rng.uniform(-0.02, 0.06)  # per quarter
    margin = rng.uniform(0.04, 0.15)
    assets = annual_sales * rng.uniform(0.8, 1.5)
    recs = []
    for k, (ptype, end) in enumerate(plan):
        months = PERIOD_MONTHS[ptype]
        scale = months / 12.0 * (1 + growth) ** (k * months / 3.0) * rng.uniform(0.9, 1.1)
        sales = annual_sales * scale
        cost = sales * rng.uniform(0.6, 0.8)
        op = sales * margin * rng.uniform(0.5, 1.5)
        ni = op * rng.uniform(0.55, 0.75) * (1 if rng.random() > 0.1 else -1)
        assets *= rng.uniform(0.99, 1.03)
        equity = assets * rng.uniform(0.3, 0.6)
        items = {
            "sales": sales, "cost_of_sales": cost, "operating_profit": op, "net_income": ni,
            "depreciation": sales * rng.uniform(0.02, 0.05), "operating_cf": op * rng.uniform(0.8, 1.3),
            "investing_cf": -sales * rng.uniform(0.02, 0.08), "eps": ni / shares,
            "dividends_per_share": max(ni, 0) * 0.3 / shares,
            "total_assets": assets, "equity": equity, "cash": assets * rng.uniform(0.05, 0.2),
            "receivables": assets * rng.uniform(0.05, 0.15), "financial_assets": assets * rng.uniform(0.0, 0.1),
            "inventory": assets * rng.uniform(0.05, 0.2), "current_liabilities": assets * rng.uniform(0.15, 0.3),
            "interest_bearing_debt": assets * rng.uniform(0.05, 0.3), "issued_shares": shares,
        }
        if rng.random() < 0.05:  # occasional unreported line item
            items["depreciation"] = MISSING
        items = {kk: (float(v) if v == v else MISSING) for kk, v in items.items()}
        publish = end + dt.timedelta(days=int(rng.integers(30, 60)))
        if publish > last_day:
            continue
        texts = _texts(rng, code, end)
        recs.append(StatementRecord(code, ptype, end, publish, {k: items[k] for k in LINE_ITEMS}, texts))
    return recs


def _news(rng, universe, days: list[dt.date]) -> list[NewsItem]:
    codes = [t.code for t in universe]
    items = []
    serial = 0
    months = sorted({month_of(d) for d in days})
    for m in months:
        mdays = [d for d in days if month_of(d) == m]
        for code in codes:
            for _ in range(int(rng.integers(0, 3))):
                serial += 1
                d = mdays[int(rng.integers(len(mdays)))]
                topic = _TOPICS[int(rng.integers(len(_TOPICS)))]
                tone = _TONES[int(rng.integers(len(_TONES)))]
                matches = (code,)
                if rng.random() < 0.1:
                    other = codes[int(rng.integers(len(codes)))]
                    matches = tuple(sorted({code, other}))
                items.append(NewsItem(matches, d, f"{code} {topic} update #{serial}",
                                      f"Coverage describes {tone} {topic} trends (item {serial})."))
    items.sort(key=lambda n: (n.date, n.headline, n.ticker_matches))
    return items


def _macro(rng, months: list[str]) -> dict:
    level = {k: rng.uniform(1.0, 100.0) for k in MACRO_INDICATORS}
    out = {}
    prev = None
    for m in months:
        cur = {k: float(round(v * (1 + rng.normal(0, 0.02)), 4)) for k, v in level.items()}
        level = cur
        vals = {k: (cur[k], pct_change(cur[k], prev[k]) if prev else MISSING) for k in MACRO_INDICATORS}
        out[m] = MacroSnapshot(m, vals)
        prev = cur
    return out


def make_repository(n_tickers: int = 6, first_month: str = "2022-01", last_month: str = "2024-05",
                    seed: int = 7) -> DataRepository:
    """Build the synthetic repository in memory."""
    rng = np.random.default_rng(seed)
    universe = _universe(n_tickers)
    days = business_days(_month_start(first_month), month_end(last_month))
    prices = {t.code: _prices(rng, t.code, days) for t in universe}
    first_fy = parse_month(first_month)[0] - 3
    last_fy = parse_month(last_month)[0] + 1
    statements = {}
    for i, t in enumerate(universe):
        recs = _statements(rng, t.code, FILING_STYLES[i % len(FILING_STYLES)], first_fy, last_fy, days[-1])
        statements[t.code] = tuple(sorted(recs, key=lambda r: (r.publish_date, r.period_end, r.months)))
    news_items = _news(rng, universe, days)
    news = {t.code: tuple(n for n in news_items if t.code in n.ticker_matches) for t in universe}
    macro = _macro(rng, month_range(first_month, last_month))
    cal = TradingCalendar(np.array(days, dtype="datetime64[D]"))
    return DataRepository(universe, cal, prices, statements, news, macro, (), tuple(news_items))


def write_fixture(root, **kwargs) -> DataRepository:
    """Write the synthetic repository to ``root`` and return it as loaded back from disk."""
    repo = make_repository(**kwargs)
    dump_repository(repo, root)
    return load_repository(root)


def index_returns(repo, schedule) -> dict:
    """Equal-weight universe open-to-open return per decision month, a stand-in market index."""
    from .portfolio import holding_periods

    out = {}
    for dec, exe, nxt in holding_periods(repo.calendar, schedule):
        rs = [s.open_on(nxt) / s.open_on(exe) - 1.0 for _, s in sorted(repo.prices.items())]
        out[month_of(dec)] = float(np.mean(rs))
    return out


def write_index_csv(path, returns: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["month", "return"])
        for m in sorted(returns):
            wr.writerow([m, repr(returns[m])])


def correlated_streams(n: int, rho: float, mean: float = 0.01, vol: float = 0.03, seed: int = 0):
    """Two return series with sample correlation exactly ``rho`` and identical mean and volatility."""
    if n < 3:
        raise ValueError("need at least 3 observations to fix a sample correlation")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 2))
    z -= z.mean(axis=0)
    # whiten so the sample covariance is exactly the identity
    L = np.linalg.cholesky(np.cov(z, rowvar=False, ddof=1))
    z = z @ np.linalg.inv(L).T
    a = z[:, 0]
    b = rho * z[:, 0] + np.sqrt(1 - rho ** 2) * z[:, 1]
    return mean + vol * a, mean + vol * b


def default_window(repo) -> tuple[str, str]:
    """Twelve decision months, leaving a year of price history before and two months after."""
    months = sorted({month_of(d) for d in repo.calendar.as_dates()})
    start = add_months(months[0], 15)
    return start, add_months(start, 11)
