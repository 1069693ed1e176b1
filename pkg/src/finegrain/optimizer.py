"""Equal-risk-contribution composite of several long-short strategies, and the index blend sweep.

The strategy covariance is Σ = P V Pᵀ, where the rows of P are the strategies'
stock weights and V is the stock covariance.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .portfolio import annualize, sharpe
from .util import month_of

PSD_TOL = 1e-10


@dataclass(frozen=True)
class StrategyPanel:
    P: np.ndarray  # M x n
    labels: tuple
    tickers: tuple

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2:
            raise ValueError("P must be a matrix")
        if P.shape[0] < 1 or P.shape != (len(self.labels), len(self.tickers)):
            raise ValueError(f"P shape {P.shape} does not match {len(self.labels)} labels x {len(self.tickers)} tickers")
        object.__setattr__(self, "P", P)

    @classmethod
    def from_books(cls, books: dict, tickers=None) -> "StrategyPanel":
        """``books`` maps strategy label -> {ticker: weight}; absent tickers weigh 0."""
        labels = tuple(books)
        if tickers is None:
            tickers = sorted({t for w in books.values() for t in w})
        P = np.array([[books[l].get(t, 0.0) for t in tickers] for l in labels], dtype=float)
        return cls(P, labels, tuple(tickers))


@dataclass(frozen=True)
class CovarianceEstimate:
    V: np.ndarray
    months: tuple = ()

    @property
    def n(self) -> int:
        return self.V.shape[0]


@dataclass(frozen=True)
class ErcSolution:
    w: np.ndarray
    risk_contributions: np.ndarray
    iterations: int
    residual: float  # max relative deviation of RC from its mean


def stock_covariance(returns, months=()) -> CovarianceEstimate:
    """Sample covariance (n-1 denominator) of a T x n matrix of monthly returns, symmetrised."""
    R = np.asarray(returns, dtype=float)
    if R.ndim != 2:
        raise ValueError("expected a T x n matrix")
    if R.shape[0] < 2:
        raise ValueError(f"need at least 2 months, got {R.shape[0]}")
    if not np.all(np.isfinite(R)):
        raise ValueError("returns contain missing values")
    V = np.cov(R, rowvar=False, ddof=1).reshape(R.shape[1], R.shape[1])
    return CovarianceEstimate(0.5 * (V + V.T), tuple(months))


def strategy_covariance(panel: StrategyPanel, V: CovarianceEstimate | np.ndarray) -> np.ndarray:
    Vm = V.V if isinstance(V, CovarianceEstimate) else np.asarray(V, dtype=float)
    if Vm.shape != (panel.P.shape[1], panel.P.shape[1]):
        raise ValueError(f"V is {Vm.shape}, P has {panel.P.shape[1]} columns")
    S = panel.P @ Vm @ panel.P.T
    return 0.5 * (S + S.T)


def risk_contributions(w, S) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    S = np.asarray(S, dtype=float)
    vol = math.sqrt(float(w @ S @ w))
    return w * (S @ w) / vol


def erc_weights(S, tol: float = 1e-10, max_iter: int = 10_000) -> ErcSolution:
    """Long-only weights summing to 1 with equal risk contributions.

    Cyclical coordinate descent on ½ yᵀSy − (1/M) Σ log y, whose minimiser is
    proportional to the ERC portfolio; each coordinate step is a closed-form
    quadratic root.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("Σ must be square")
    if not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max())):
        raise ValueError("Σ must be symmetric")
    M = S.shape[0]
    d = np.diag(S)
    if np.any(d <= 0):
        raise ValueError(f"strategies with zero variance: {np.flatnonzero(d <= 0).tolist()}")
    if np.linalg.eigvalsh(S).min() < -PSD_TOL * max(1.0, d.max()):
        raise ValueError("Σ is not positive semi-definite")
    b = 1.0 / M
    y = 1.0 / np.sqrt(d)
    y /= y.sum()
    residual = math.inf
    it = 0
    while it < max_iter:
        it += 1
        for i in range(M):
            c = float(S[i] @ y - S[i, i] * y[i])
            y[i] = (-c + math.sqrt(c * c + 4.0 * S[i, i] * b)) / (2.0 * S[i, i])
        w = y / y.sum()
        rc = risk_contributions(w, S)
        residual = float((rc.max() - rc.min()) / rc.mean())
        if residual <= tol:
            break
    w = y / y.sum()
    return ErcSolution(w, risk_contributions(w, S), it, residual)


def stock_month_returns(prices: dict, tickers, calendar, end_date) -> tuple[list, np.ndarray]:
    """Month-end close-to-close returns for months ending on or before ``end_date``.

    Returns (months, T x n matrix); a month is listed under its end month.
    """
    days = [d for d in calendar.as_dates() if d <= end_date]
    months = sorted({month_of(d) for d in days})
    ends = []
    for m in months:
        last = calendar.last_in_month(m)
        if last <= end_date:
            ends.append((m, last))
    closes = np.array([[prices[t].close_asof(d) for t in tickers] for _, d in ends], dtype=float)
    if len(ends) < 2:
        return [], np.empty((0, len(tickers)))
    rets = closes[1:] / closes[:-1] - 1.0
    return [m for m, _ in ends[1:]], rets


@dataclass
class CompositeResult:
    months: list
    returns: list
    erc: list  # per-month ErcSolution
    stock_weights: list  # per-month {ticker: weight}
    turnover: list
    labels: tuple = ()
    net: list = field(default_factory=list)


def composite_returns(panels: dict, covariances: dict, stock_returns: dict, cost_bps: float = 0.0) -> CompositeResult:
    """ERC-weighted combination of the strategies, re-solved every month.

    ``panels``: month -> StrategyPanel; ``covariances``: month -> CovarianceEstimate
    estimated from data available at the decision date; ``stock_returns``:
    month -> {ticker: holding-period return}. Turnover is measured on the
    composite's stock-level weights.
    """
    months, rets, sols, books, turns, net = [], [], [], [], [], []
    prev: dict = {}
    labels = ()
    for m in sorted(panels):
        panel = panels[m]
        labels = panel.labels
        sol = erc_weights(strategy_covariance(panel, covariances[m]))
        r = np.array([stock_returns[m][t] for t in panel.tickers], dtype=float)
        strat = panel.P @ r
        ret = float(sol.w @ strat)
        stock_w = dict(zip(panel.tickers, (sol.w @ panel.P).tolist()))
        names = sorted(set(prev) | set(stock_w))
        t = float(sum(abs(stock_w.get(k, 0.0) - prev.get(k, 0.0)) for k in names))
        months.append(m)
        rets.append(ret)
        sols.append(sol)
        books.append(stock_w)
        turns.append(t)
        net.append(ret - cost_bps * 1e-4 * t)
        prev = stock_w
    return CompositeResult(months, rets, sols, books, turns, labels, net)


def expanding_covariances(prices: dict, tickers, calendar, decision_dates: dict, min_months: int = 6) -> dict:
    """month -> CovarianceEstimate from every complete month ending by that month's decision date."""
    out = {}
    for m, d in sorted(decision_dates.items()):
        used, R = stock_month_returns(prices, tickers, calendar, d)
        if len(used) < min_months:
            raise ValueError(f"{m}: only {len(used)} months of history before {d}, need {min_months}")
        out[m] = stock_covariance(R, used)
    return out


# --- blend sweep ---------------------------------------------------------------

def _stats(r) -> dict:
    ann_ret, ann_vol, ann_sr = annualize(r)
    try:
        msr = sharpe(r)
    except ValueError:
        msr = float("nan")
    return {"ann_return": ann_ret, "ann_vol": ann_vol, "ann_sharpe": ann_sr, "monthly_sharpe": msr}


@dataclass(frozen=True)
class BlendPoint:
    allocation: float
    gross: dict
    net: dict
    gross_returns: tuple
    net_returns: tuple


ALLOCATIONS = tuple(round(a, 10) for a in np.linspace(0.0, 1.0, 11))


def blend_sweep(index_returns, composite_returns_, composite_turnover=None, cost_bps: float = 10.0,
                allocations=ALLOCATIONS) -> list[BlendPoint]:
    """(1-a)·index + a·composite for each allocation a; costs hit the composite leg only."""
    idx = np.asarray(index_returns, dtype=float)
    comp = np.asarray(composite_returns_, dtype=float)
    if idx.shape != comp.shape:
        raise ValueError(f"series lengths differ: {idx.shape} vs {comp.shape}")
    turn = np.zeros_like(comp) if composite_turnover is None else np.asarray(composite_turnover, dtype=float)
    comp_net = comp - cost_bps * 1e-4 * turn
    out = []
    for a in allocations:
        g = (1.0 - a) * idx + a * comp
        n = (1.0 - a) * idx + a * comp_net
        out.append(BlendPoint(float(a), _stats(g), _stats(n), tuple(g.tolist()), tuple(n.tolist())))
    return out


def blend_curve_csv(points) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["allocation", "gross_return", "gross_vol", "gross_sharpe", "net_return", "net_vol", "net_sharpe"])
    for p in points:
        wr.writerow([repr(p.allocation)] + [repr(p.gross[k]) for k in ("ann_return", "ann_vol", "ann_sharpe")]
                    + [repr(p.net[k]) for k in ("ann_return", "ann_vol", "ann_sharpe")])
    return buf.getvalue()


def blend_summary(points, index_label: str = "Index") -> dict:
    """Rows: index alone, composite alone, 50-50 blend; gross and net annualised columns."""
    by_a = {p.allocation: p for p in points}

    def row(p):
        pick = ("ann_return", "ann_vol", "ann_sharpe")
        return {"gross": {k: p.gross[k] for k in pick}, "net": {k: p.net[k] for k in pick}}

    return {
        "columns": ["ann_return", "ann_vol", "ann_sharpe"],
        "rows": {
            index_label: row(by_a[0.0]),
            "Agent Strategies": row(by_a[1.0]),
            "50-50 Combined": row(by_a[0.5]),
        },
    }


def blend_summary_json(points, index_label: str = "Index") -> str:
    return json.dumps(blend_summary(points, index_label), indent=1) + "\n"
