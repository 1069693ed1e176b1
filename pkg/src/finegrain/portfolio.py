"""Market-neutral long-short construction, the monthly backtest loop and performance statistics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .marketdata import CalendarGapError, slice_asof
from .util import add_months, is_missing, month_of


@dataclass(frozen=True)
class PortfolioWeights:
    month: str
    weights: dict  # ticker -> signed weight

    @property
    def longs(self) -> list[str]:
        return sorted(t for t, w in self.weights.items() if w > 0)

    @property
    def shorts(self) -> list[str]:
        return sorted(t for t, w in self.weights.items() if w < 0)

    @property
    def gross(self) -> float:
        return sum(abs(w) for w in self.weights.values())


def construct(scores: dict, n: int, month: str = "") -> PortfolioWeights:
    """Long the top n/2 scores at +2/n, short the bottom n/2 at -2/n.

    Ties rank by ascending ticker code. Missing scores are dropped before ranking.
    """
    if n <= 0 or n % 2:
        raise ValueError(f"N must be a positive even integer, got {n}")
    scored = {t: float(s) for t, s in scores.items() if not is_missing(s)}
    if len(scored) < n:
        raise ValueError(f"need at least {n} scored tickers, got {len(scored)}")
    order = sorted(scored, key=lambda t: (-scored[t], t))
    half = n // 2
    w = 2.0 / n
    weights = {t: w for t in order[:half]}
    weights.update({t: -w for t in order[-half:]})
    return PortfolioWeights(month, weights)


def _leg_return(tickers, prices, start, end) -> float:
    total = 0.0
    for t in tickers:
        series = prices[t]
        o0, o1 = series.open_on(start), series.open_on(end)
        if o0 is None or is_missing(o0):
            raise KeyError(f"{t}: no open on {start}")
        if o1 is None or is_missing(o1):
            raise KeyError(f"{t}: no open on {end}")
        total += o1 / o0 - 1.0
    return total


def month_return(weights: PortfolioWeights, prices: dict, execution_date, next_execution_date) -> float:
    """Open-to-open return of the book; each leg is summed on its own so the two cancel exactly."""
    longs, shorts = weights.longs, weights.shorts
    if longs and shorts and {abs(weights.weights[t]) for t in longs + shorts} == {weights.weights[longs[0]]}:
        w = weights.weights[longs[0]]
        return w * _leg_return(longs, prices, execution_date, next_execution_date) - w * _leg_return(
            shorts, prices, execution_date, next_execution_date)
    # unequal weights: plain weighted sum
    return sum(w * _leg_return([t], prices, execution_date, next_execution_date)
               for t, w in sorted(weights.weights.items()))


def turnover(prev: PortfolioWeights | None, nxt: PortfolioWeights) -> float:
    """Sum of absolute weight changes (a fresh gross-2 book trades 2, a full N=2 swap trades 4)."""
    before = prev.weights if prev is not None else {}
    names = sorted(set(before) | set(nxt.weights))
    return float(sum(abs(nxt.weights.get(t, 0.0) - before.get(t, 0.0)) for t in names))


def sharpe(returns) -> float:
    """Monthly Sharpe: mean over sample standard deviation, risk-free rate 0."""
    r = np.asarray(list(returns), dtype=float)
    if r.size < 2:
        raise ValueError("Sharpe needs at least 2 observations")
    sd = r.std(ddof=1)
    if sd == 0 or np.all(r == r[0]):
        raise ValueError("Sharpe undefined for zero variance")
    return float(r.mean() / sd)


def annualize(returns) -> tuple[float, float, float]:
    """(compounded annual return, monthly std * sqrt(12), their ratio). The ratio is NaN at zero volatility."""
    r = np.asarray(list(returns), dtype=float)
    if r.size < 2:
        raise ValueError("annualizing needs at least 2 observations")
    ann_ret = float(np.prod(1.0 + r) ** (12.0 / r.size) - 1.0)
    ann_vol = float(r.std(ddof=1) * math.sqrt(12.0))
    ann_sr = ann_ret / ann_vol if ann_vol > 0 else float("nan")
    return ann_ret, ann_vol, ann_sr


@dataclass
class BacktestResult:
    months: list
    gross: list
    net: list
    turnover: list
    weights: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def monthly_returns(self) -> list[tuple]:
        return list(zip(self.months, self.gross, self.net))

    def stats(self, which: str = "net") -> dict:
        r = self.net if which == "net" else self.gross
        out = {"monthly_sharpe": float("nan"), "ann_return": float("nan"), "ann_vol": float("nan"),
               "ann_sharpe": float("nan")}
        if len(r) >= 2:
            try:
                out["monthly_sharpe"] = sharpe(r)
            except ValueError:
                pass
            out["ann_return"], out["ann_vol"], out["ann_sharpe"] = annualize(r)
        return out

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "months": list(self.months),
            "gross": list(self.gross),
            "net": list(self.net),
            "turnover": list(self.turnover),
            "weights": [{"month": w.month, "weights": dict(sorted(w.weights.items()))} for w in self.weights],
            "stats": {"gross": self.stats("gross"), "net": self.stats("net")},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "BacktestResult":
        weights = [PortfolioWeights(w["month"], dict(w["weights"])) for w in d.get("weights", [])]
        return cls(list(d["months"]), list(d["gross"]), list(d["net"]), list(d["turnover"]), weights,
                   dict(d.get("config", {})))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["month", "gross_return", "net_return", "turnover"])
        for m, g, n, t in zip(self.months, self.gross, self.net, self.turnover):
            wr.writerow([m, repr(g), repr(n), repr(t)])
        return buf.getvalue()


def holding_periods(calendar, schedule) -> list[tuple]:
    """(decision, execution, next_execution) per scheduled month.

    The last month is held until the first business day of the month after its execution month.
    """
    out = []
    for i, (dec, exe) in enumerate(schedule):
        if i + 1 < len(schedule):
            nxt = schedule[i + 1][1]
        else:
            try:
                nxt = calendar.first_in_month(add_months(month_of(exe), 1))
            except CalendarGapError as e:
                raise CalendarGapError(f"no business day to close the last holding period after {exe}") from e
        out.append((dec, exe, nxt))
    return out


def run_backtest(repo, schedule, score_provider, n: int, cost_bps: float = 10.0, config: dict | None = None,
                 score_log: dict | None = None) -> BacktestResult:
    """Monthly loop: slice as of the decision date, score, build the book, hold open-to-open.

    ``score_provider(view, month)`` returns {ticker: score}. When ``score_log``
    is a dict the scores of each month are recorded in it.
    """
    months, gross, net, turns, books = [], [], [], [], []
    prev = None
    for dec, exe, nxt in holding_periods(repo.calendar, schedule):
        month = month_of(dec)
        view = slice_asof(repo, dec)
        scores = score_provider(view, month)
        if score_log is not None:
            score_log[month] = dict(scores)
        book = construct(scores, n, month)
        g = month_return(book, repo.prices, exe, nxt)
        t = turnover(prev, book)
        months.append(month)
        gross.append(g)
        net.append(g - cost_bps * 1e-4 * t)
        turns.append(t)
        books.append(book)
        prev = book
    cfg = {"N": n, "cost_bps": cost_bps}
    cfg.update(config or {})
    return BacktestResult(months, gross, net, turns, books, cfg)
