"""Fundamental inputs for the Quantitative agent.

Fine-grained: sixteen TTM-based ratios with month-over-month differences.
Coarse-grained: raw line items with month-over-month rate of change.
Flows are trailing-twelve-month sums; stocks come from the latest published balance sheet.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

from .marketdata import FLOW_ITEMS, LINE_ITEMS, StatementRecord
from .util import MISSING, add_months, is_missing, month_end, month_of, parse_date, pct_change, safe_div

FINE_METRICS = (
    "net_margin", "roa", "roe", "asset_turnover", "inventory_turn_days",
    "per",
    "fcf", "fcf_margin", "ebitda",
    "equity_ratio", "quick_ratio", "de_ratio",
    "sales_yoy", "sales_cagr_3y", "eps_growth", "dps",
)
# Metrics named in the methodology text but absent from the operative prompt.
EXTRA_METRICS = ("operating_margin", "ev_ebitda", "dividend_yield")

COARSE_ITEMS = LINE_ITEMS + ("monthly_close",)


@dataclass(frozen=True)
class TtmAggregate:
    values: dict
    coverage_months: int
    anchor: str | None  # month of the latest covering period_end
    periods: tuple = ()

    def __getitem__(self, item: str) -> float:
        return self.values[item]


def _published(statements, asof: dt.date) -> list[StatementRecord]:
    return [r for r in statements if r.publish_date <= asof]


def _latest_by_period(records) -> dict[str, list[StatementRecord]]:
    """Index records by period-end month, keeping the latest filing per (end, length), longest first."""
    best: dict[tuple[str, int], StatementRecord] = {}
    for r in records:
        key = (month_of(r.period_end), r.months)
        cur = best.get(key)
        if cur is None or r.publish_date >= cur.publish_date:
            best[key] = r
    out: dict[str, list] = {}
    for (m, _), r in best.items():
        out.setdefault(m, []).append(r)
    for v in out.values():
        v.sort(key=lambda r: -r.months)
    return out


def _cover(by_end, cursor: str, remaining: int):
    """Depth-first search for contiguous periods ending at ``cursor`` that fill ``remaining`` months.

    Returns the best chain found (full cover if one exists, else the longest partial one).
    """
    best: tuple[list, int] = ([], 0)
    for r in by_end.get(cursor, ()):
        if r.months > remaining:
            continue
        if r.months == remaining:
            return [r], r.months
        chain, covered = _cover(by_end, add_months(cursor, -r.months), remaining - r.months)
        total = r.months + covered
        if total == remaining:
            return [r] + chain, total
        if total > best[1]:
            best = ([r] + chain, total)
    return best


def ttm(statements, asof, anchor: str | None = None) -> TtmAggregate:
    """Trailing-twelve-month sums of the flow items from filings published by ``asof``.

    ``anchor`` (a month) fixes where the window ends; by default it is the
    latest period end available. An item is missing unless every covering
    period reports it and the periods cover exactly 12 months.
    """
    records = _published(statements, parse_date(asof))
    if not records:
        return TtmAggregate({k: MISSING for k in FLOW_ITEMS}, 0, anchor)
    by_end = _latest_by_period(records)
    if anchor is None:
        anchor = max(by_end)
    chain, covered = _cover(by_end, anchor, 12)
    values = {}
    for item in FLOW_ITEMS:
        if covered < 12:
            values[item] = MISSING
            continue
        parts = [r.get(item) for r in chain]
        values[item] = MISSING if any(is_missing(p) for p in parts) else float(sum(parts))
    return TtmAggregate(values, covered, anchor, tuple(chain))


def latest_balance_sheet(statements, asof) -> StatementRecord | None:
    records = _published(statements, parse_date(asof))
    if not records:
        return None
    return max(records, key=lambda r: (r.period_end, r.publish_date))


def info_updated(statements, asof) -> bool:
    d = parse_date(asof)
    return any(r.publish_date <= d and month_of(r.publish_date) == month_of(d) for r in statements)


def _growth(cur: float, prev: float) -> float:
    # relative to |prev| so a loss-to-profit swing reads as growth
    if is_missing(cur) or is_missing(prev) or prev == 0:
        return MISSING
    return (cur - prev) / abs(prev)


def _cagr(cur: float, base: float, years: int) -> float:
    if is_missing(cur) or is_missing(base) or base <= 0 or cur <= 0:
        return MISSING
    return (cur / base) ** (1.0 / years) - 1.0


def _add(a: float, b: float) -> float:
    return MISSING if is_missing(a) or is_missing(b) else a + b


def _metric_values(statements, prices, asof) -> dict:
    asof = parse_date(asof)
    flows = ttm(statements, asof)
    bs = latest_balance_sheet(statements, asof)
    stock = (lambda k: bs.get(k)) if bs is not None else (lambda k: MISSING)
    close = prices.close_asof(asof) if prices is not None else MISSING

    if flows.anchor is not None:
        prior = ttm(statements, asof, add_months(flows.anchor, -12))
        base3 = ttm(statements, asof, add_months(flows.anchor, -36))
    else:
        prior = base3 = flows
    sales, ni = flows["sales"], flows["net_income"]
    assets, equity = stock("total_assets"), stock("equity")
    fcf = _add(flows["operating_cf"], flows["investing_cf"])
    ebitda = _add(flows["operating_profit"], flows["depreciation"])
    liquid = _add(_add(stock("cash"), stock("receivables")), stock("financial_assets"))

    v = {
        "net_margin": safe_div(ni, sales),
        "roa": safe_div(ni, assets),
        "roe": safe_div(ni, equity),
        "asset_turnover": safe_div(sales, assets),
        "inventory_turn_days": safe_div(365.0 * stock("inventory") if not is_missing(stock("inventory")) else MISSING,
                                        flows["cost_of_sales"]),
        "per": safe_div(close, flows["eps"]),
        "fcf": fcf,
        "fcf_margin": safe_div(fcf, sales),
        "ebitda": ebitda,
        "equity_ratio": safe_div(equity, assets),
        "quick_ratio": safe_div(liquid, stock("current_liabilities")),
        "de_ratio": safe_div(stock("interest_bearing_debt"), equity),
        "sales_yoy": _growth(sales, prior["sales"]),
        "sales_cagr_3y": _cagr(sales, base3["sales"], 3),
        "eps_growth": _growth(flows["eps"], prior["eps"]),
        "dps": flows["dividends_per_share"],
    }
    mcap = MISSING if is_missing(close) or is_missing(stock("issued_shares")) else close * stock("issued_shares")
    ev = _add(_add(mcap, stock("interest_bearing_debt")), -stock("cash") if not is_missing(stock("cash")) else MISSING)
    v["operating_margin"] = safe_div(flows["operating_profit"], sales)
    v["ev_ebitda"] = safe_div(ev, ebitda)
    v["dividend_yield"] = safe_div(flows["dividends_per_share"], close)
    return v


def _prior_month_asof(asof: dt.date) -> dt.date:
    return month_end(add_months(month_of(asof), -1))


@dataclass
class FineMetricPack:
    values: dict
    changes: dict  # arithmetic difference vs the prior month-end
    info_updated: bool
    extras: dict = field(default_factory=dict)

    kind = "fine"

    @property
    def diffs(self) -> dict:
        return self.changes


@dataclass
class CoarsePack:
    values: dict
    changes: dict  # percent rate of change vs the prior month-end
    info_updated: bool
    eps_1y_ago: float = MISSING
    eps_3y_ago: float = MISSING

    kind = "coarse"

    @property
    def roc(self) -> dict:
        return self.changes


def fine_metrics(statements, prices, asof) -> FineMetricPack:
    asof = parse_date(asof)
    cur = _metric_values(statements, prices, asof)
    prev = _metric_values(statements, prices, _prior_month_asof(asof))
    values = {k: cur[k] for k in FINE_METRICS}
    changes = {k: MISSING if is_missing(cur[k]) or is_missing(prev[k]) else cur[k] - prev[k] for k in FINE_METRICS}
    return FineMetricPack(values, changes, info_updated(statements, asof), {k: cur[k] for k in EXTRA_METRICS})


def _raw_values(statements, prices, asof) -> dict:
    flows = ttm(statements, asof)
    bs = latest_balance_sheet(statements, asof)
    out = dict(flows.values)
    for k in LINE_ITEMS:
        if k not in FLOW_ITEMS:
            out[k] = bs.get(k) if bs is not None else MISSING
    out["monthly_close"] = prices.close_asof(asof) if prices is not None else MISSING
    return out


def coarse_pack(statements, prices, asof) -> CoarsePack:
    asof = parse_date(asof)
    cur = _raw_values(statements, prices, asof)
    prev = _raw_values(statements, prices, _prior_month_asof(asof))
    flows = ttm(statements, asof)
    if flows.anchor is not None:
        eps1 = ttm(statements, asof, add_months(flows.anchor, -12))["eps"]
        eps3 = ttm(statements, asof, add_months(flows.anchor, -36))["eps"]
    else:
        eps1 = eps3 = MISSING
    changes = {k: pct_change(cur[k], prev[k]) for k in COARSE_ITEMS}
    return CoarsePack({k: cur[k] for k in COARSE_ITEMS}, changes, info_updated(statements, asof), eps1, eps3)


@dataclass
class SectorAverage:
    sector: str
    kind: str
    values: dict
    changes: dict
    counts: dict
    members: tuple


def _mean(xs) -> float:
    xs = [x for x in xs if not is_missing(x)]
    return math.fsum(xs) / len(xs) if xs else MISSING


def sector_averages(packs: dict, universe) -> dict[str, SectorAverage]:
    """Per-sector mean of every metric, ignoring missing values; contributor counts kept."""
    sectors: dict[str, list[str]] = {}
    for t in universe:
        sectors.setdefault(t.sector, [])
        if t.code in packs:
            sectors[t.sector].append(t.code)
    known = {t.code for t in universe}
    stray = sorted(set(packs) - known)
    if stray:
        raise KeyError(f"tickers without a sector: {stray}")
    out = {}
    for sector, codes in sorted(sectors.items()):
        if not codes:
            raise ValueError(f"sector {sector!r} has no constituents with packs")
        codes = sorted(codes)
        members = [packs[c] for c in codes]
        kinds = {p.kind for p in members}
        if len(kinds) != 1:
            raise TypeError(f"sector {sector!r} mixes pack kinds {sorted(kinds)}")
        names = list(members[0].values)
        out[sector] = SectorAverage(
            sector=sector,
            kind=kinds.pop(),
            values={k: _mean(p.values[k] for p in members) for k in names},
            changes={k: _mean(p.changes[k] for p in members) for k in names},
            counts={k: sum(not is_missing(p.values[k]) for p in members) for k in names},
            members=tuple(codes),
        )
    return out
