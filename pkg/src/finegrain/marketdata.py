"""Point-in-time market data: fixture loading, trading calendar, rebalance schedule, as-of slicing.

Fixture layout under a data root::

    universe.json       [{"code": "7203", "sector": "Autos"}, ...]
    prices/<code>.csv   header ``date,open,close``
    statements.jsonl    one StatementRecord per line
    news.jsonl          one NewsItem per line
    macro.jsonl         one MacroSnapshot per line

Everything returned from :func:`load_repository` is treated as immutable.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .util import MISSING, is_missing, month_of, month_range, parse_date, parse_month, pct_change, add_months, to_float

logger = logging.getLogger(__name__)

PERIOD_MONTHS = {"quarterly": 3, "semi-annual": 6, "annual": 12}

FLOW_ITEMS = (
    "sales", "cost_of_sales", "operating_profit", "net_income", "depreciation",
    "operating_cf", "investing_cf", "eps", "dividends_per_share",
)
STOCK_ITEMS = (
    "total_assets", "equity", "cash", "receivables", "financial_assets", "inventory",
    "current_liabilities", "interest_bearing_debt", "issued_shares",
)
LINE_ITEMS = FLOW_ITEMS + STOCK_ITEMS

# Qualitative excerpt sections carried by (some) statement records.
TEXT_SECTIONS = ("overview", "risks", "mdna", "governance")

MACRO_INDICATORS = (
    "us_fed_funds", "us_10y", "jp_policy_rate", "jp_10y",
    "us_cpi", "jp_cpi", "gold", "crude_oil",
    "us_payrolls", "industrial_production", "housing_starts", "unemployment", "jp_business_conditions",
    "usd_jpy", "nikkei225", "sp500", "us_vix", "nikkei_vi",
)


class DataError(ValueError):
    """Fatal fixture problem: missing universe, malformed row, duplicate price date."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = f"{path}:{line}: " if path is not None and line is not None else (f"{path}: " if path else "")
        super().__init__(loc + message)
        self.path = path
        self.line = line


class CalendarGapError(ValueError):
    pass


@dataclass(frozen=True)
class Rejection:
    path: str
    line: int
    reason: str

    def __str__(self):
        return f"{self.path}:{self.line}: {self.reason}"


@dataclass(frozen=True)
class Ticker:
    code: str
    sector: str


@dataclass(frozen=True)
class PriceBar:
    date: dt.date
    open: float
    close: float


class TradingCalendar:
    """Ordered business days, stored as ``datetime64[D]`` for fast searches."""

    def __init__(self, days):
        arr = np.array(sorted(set(np.asarray(days, dtype="datetime64[D]").tolist())), dtype="datetime64[D]")
        self.days = arr

    def __len__(self):
        return len(self.days)

    def __contains__(self, d) -> bool:
        d = np.datetime64(parse_date(d), "D")
        i = np.searchsorted(self.days, d)
        return bool(i < len(self.days) and self.days[i] == d)

    def in_month(self, m: str) -> np.ndarray:
        y, mo = parse_month(m)
        lo = np.datetime64(f"{y:04d}-{mo:02d}", "M").astype("datetime64[D]")
        hi = (np.datetime64(f"{y:04d}-{mo:02d}", "M") + 1).astype("datetime64[D]")
        return self.days[np.searchsorted(self.days, lo):np.searchsorted(self.days, hi)]

    def first_in_month(self, m: str) -> dt.date:
        days = self.in_month(m)
        if len(days) == 0:
            raise CalendarGapError(f"no business days in {m}")
        return days[0].item()

    def last_in_month(self, m: str) -> dt.date:
        days = self.in_month(m)
        if len(days) == 0:
            raise CalendarGapError(f"no business days in {m}")
        return days[-1].item()

    def truncate(self, d: dt.date) -> "TradingCalendar":
        k = np.searchsorted(self.days, np.datetime64(d, "D"), side="right")
        out = TradingCalendar.__new__(TradingCalendar)
        out.days = self.days[:k]
        return out

    def as_dates(self) -> list[dt.date]:
        return [d.item() for d in self.days]


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Daily open/close bars for one ticker; arrays are parallel and date-ordered."""

    ticker: str
    dates: np.ndarray  # datetime64[D]
    opens: np.ndarray
    closes: np.ndarray

    def __post_init__(self):
        if len(self.dates) > 1 and not np.all(self.dates[1:] > self.dates[:-1]):
            raise ValueError(f"{self.ticker}: price dates must be strictly increasing")

    def __len__(self):
        return len(self.dates)

    @classmethod
    def from_bars(cls, ticker: str, bars) -> "PriceSeries":
        bars = list(bars)
        return cls(
            ticker,
            np.array([b.date for b in bars], dtype="datetime64[D]"),
            np.array([b.open for b in bars], dtype=float),
            np.array([b.close for b in bars], dtype=float),
        )

    @property
    def bars(self) -> list[PriceBar]:
        return [PriceBar(d.item(), float(o), float(c)) for d, o, c in zip(self.dates, self.opens, self.closes)]

    def count_asof(self, d) -> int:
        """Number of bars dated on or before ``d``."""
        return int(np.searchsorted(self.dates, np.datetime64(parse_date(d), "D"), side="right"))

    def truncate(self, d) -> "PriceSeries":
        k = self.count_asof(d)
        return PriceSeries(self.ticker, self.dates[:k], self.opens[:k], self.closes[:k])

    def open_on(self, d) -> float | None:
        d64 = np.datetime64(parse_date(d), "D")
        i = int(np.searchsorted(self.dates, d64))
        if i < len(self.dates) and self.dates[i] == d64:
            return float(self.opens[i])
        return None

    def close_asof(self, d) -> float:
        k = self.count_asof(d)
        return float(self.closes[k - 1]) if k else MISSING


@dataclass(frozen=True)
class StatementRecord:
    ticker: str
    period_type: str
    period_end: dt.date
    publish_date: dt.date
    items: dict = field(default_factory=dict)  # line item -> float (NaN when missing)
    texts: dict = field(default_factory=dict)  # section -> excerpt text

    @property
    def months(self) -> int:
        return PERIOD_MONTHS[self.period_type]

    def get(self, item: str) -> float:
        return self.items.get(item, MISSING)


@dataclass(frozen=True)
class NewsItem:
    ticker_matches: tuple
    date: dt.date
    headline: str
    summary: str = ""


@dataclass(frozen=True)
class MacroSnapshot:
    as_of: str  # month
    indicators: dict  # name -> (level, mom_roc)


@dataclass(frozen=True, eq=False)
class DataRepository:
    universe: tuple
    calendar: TradingCalendar
    prices: dict
    statements: dict
    news: dict
    macro: dict
    rejected: tuple = ()
    news_items: tuple = ()

    @property
    def tickers(self) -> list[str]:
        return [t.code for t in self.universe]

    def sector_of(self, code: str) -> str:
        for t in self.universe:
            if t.code == code:
                return t.sector
        raise KeyError(code)


@dataclass(frozen=True, eq=False)
class DataView:
    """Everything knowable at the close of ``asof``."""

    asof: dt.date
    universe: tuple
    calendar: TradingCalendar
    prices: dict
    statements: dict
    news: dict
    macro: dict

    @property
    def tickers(self) -> list[str]:
        return [t.code for t in self.universe]

    def sector_of(self, code: str) -> str:
        for t in self.universe:
            if t.code == code:
                return t.sector
        raise KeyError(code)

    def macro_snapshot(self) -> MacroSnapshot | None:
        if not self.macro:
            return None
        return self.macro[max(self.macro)]


# ---------------------------------------------------------------------------
# loading

def _num(value, path, line, name):
    if value is None or value == "":
        return MISSING
    try:
        return to_float(value)
    except (TypeError, ValueError):
        raise DataError(f"non-numeric {name}: {value!r}", path, line) from None


def _date(value, path, line, name):
    try:
        return parse_date(value)
    except (TypeError, ValueError):
        raise DataError(f"bad {name}: {value!r}", path, line) from None


def _read_universe(path: Path) -> tuple:
    if not path.exists():
        raise DataError("universe file not found", str(path))
    try:
        rows = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"invalid JSON ({e.msg})", str(path), e.lineno) from None
    if not isinstance(rows, list) or not rows:
        raise DataError("universe must be a non-empty list of {code, sector}", str(path))
    seen = set()
    out = []
    for i, row in enumerate(rows):
        code = str(row.get("code", "")).strip() if isinstance(row, dict) else ""
        sector = str(row.get("sector", "")).strip() if isinstance(row, dict) else ""
        if not code or not sector:
            raise DataError(f"universe entry {i} needs non-empty code and sector", str(path))
        if code in seen:
            raise DataError(f"duplicate ticker {code}", str(path))
        seen.add(code)
        out.append(Ticker(code, sector))
    return tuple(out)


def _read_prices(path: Path, code: str, rejected: list) -> PriceSeries:
    bars = {}
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "open", "close"]:
            raise DataError("header must be date,open,close", str(path), 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"expected 3 columns, got {len(row)}", str(path), lineno)
            d = _date(row[0], path, lineno, "date")
            o = _num(row[1], path, lineno, "open")
            c = _num(row[2], path, lineno, "close")
            if d in bars:
                raise DataError(f"duplicate price date {d} for {code}", str(path), lineno)
            if is_missing(o) or is_missing(c) or o <= 0 or c <= 0:
                rejected.append(Rejection(str(path), lineno, "open and close must be positive"))
                continue
            bars[d] = PriceBar(d, o, c)
    return PriceSeries.from_bars(code, [bars[d] for d in sorted(bars)])


def _iter_jsonl(path: Path):
    if not path.exists():
        return
    with path.open(encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"invalid JSON ({e.msg})", str(path), lineno) from None
            if not isinstance(obj, dict):
                raise DataError("record must be a JSON object", str(path), lineno)
            yield lineno, obj


def _read_statements(path: Path, codes: set, rejected: list) -> dict:
    out: dict[str, list] = {c: [] for c in codes}
    for lineno, obj in _iter_jsonl(path):
        ptype = obj.get("period_type")
        if ptype not in PERIOD_MONTHS:
            raise DataError(f"period_type must be one of {sorted(PERIOD_MONTHS)}", str(path), lineno)
        ticker = str(obj.get("ticker", ""))
        rec = StatementRecord(
            ticker=ticker,
            period_type=ptype,
            period_end=_date(obj.get("period_end"), path, lineno, "period_end"),
            publish_date=_date(obj.get("publish_date"), path, lineno, "publish_date"),
            items={k: _num(obj.get(k), path, lineno, k) for k in LINE_ITEMS},
            texts={k: str(v) for k, v in (obj.get("texts") or {}).items() if k in TEXT_SECTIONS},
        )
        if ticker not in codes:
            rejected.append(Rejection(str(path), lineno, f"ticker {ticker!r} not in universe"))
        elif rec.publish_date < rec.period_end:
            rejected.append(Rejection(str(path), lineno, "publish_date precedes period_end"))
        elif not is_missing(rec.get("issued_shares")) and rec.get("issued_shares") <= 0:
            rejected.append(Rejection(str(path), lineno, "issued_shares must be positive"))
        else:
            out[ticker].append(rec)
    return {c: tuple(sorted(v, key=lambda r: (r.publish_date, r.period_end, r.months))) for c, v in out.items()}


def _read_news(path: Path, codes: set, rejected: list):
    items = []
    for lineno, obj in _iter_jsonl(path):
        matches = obj.get("ticker_matches")
        if not isinstance(matches, list):
            raise DataError("ticker_matches must be a list", str(path), lineno)
        item = NewsItem(
            ticker_matches=tuple(str(t) for t in matches),
            date=_date(obj.get("date"), path, lineno, "date"),
            headline=str(obj.get("headline") or ""),
            summary=str(obj.get("summary") or ""),
        )
        if not item.headline.strip():
            rejected.append(Rejection(str(path), lineno, "empty headline"))
        elif not item.ticker_matches or not set(item.ticker_matches) <= codes:
            rejected.append(Rejection(str(path), lineno, "ticker_matches must be non-empty and within universe"))
        else:
            items.append(item)
    items.sort(key=lambda n: (n.date, n.headline, n.ticker_matches))
    by_ticker: dict[str, list] = {c: [] for c in codes}
    for item in items:
        for t in item.ticker_matches:
            by_ticker[t].append(item)
    return tuple(items), {c: tuple(v) for c, v in by_ticker.items()}


def _read_macro(path: Path, rejected: list) -> dict:
    raw = {}
    for lineno, obj in _iter_jsonl(path):
        try:
            month = add_months(str(obj.get("as_of")), 0)
        except (TypeError, ValueError):
            raise DataError(f"bad as_of month {obj.get('as_of')!r}", str(path), lineno) from None
        ind = obj.get("indicators")
        if not isinstance(ind, dict):
            raise DataError("indicators must be an object", str(path), lineno)
        unknown = set(ind) - set(MACRO_INDICATORS)
        if unknown:
            rejected.append(Rejection(str(path), lineno, f"unknown indicators {sorted(unknown)}"))
            continue
        if month in raw:
            raise DataError(f"duplicate macro month {month}", str(path), lineno)
        vals = {}
        for name in MACRO_INDICATORS:
            entry = ind.get(name) or {}
            vals[name] = (_num(entry.get("level"), path, lineno, name), _num(entry.get("mom_roc"), path, lineno, name))
        raw[month] = vals
    out = {}
    for month in sorted(raw):
        prev = raw.get(add_months(month, -1))
        vals = {}
        for name, (level, roc) in raw[month].items():
            # fill the month-over-month change whenever the prior level allows it
            if is_missing(roc) and prev is not None:
                roc = pct_change(level, prev[name][0])
            vals[name] = (level, roc)
        out[month] = MacroSnapshot(month, vals)
    return out


def load_repository(root, universe_config=None) -> DataRepository:
    """Load and validate a fixture directory.

    Fatal problems (missing universe, malformed rows, duplicate price dates)
    raise :class:`DataError`; rows that parse but violate an invariant are
    dropped and listed in ``repo.rejected`` with file and line.
    """
    root = Path(root)
    universe = _read_universe(Path(universe_config) if universe_config else root / "universe.json")
    codes = {t.code for t in universe}
    rejected: list[Rejection] = []

    prices = {}
    price_dir = root / "prices"
    for t in universe:
        p = price_dir / f"{t.code}.csv"
        if not p.exists():
            rejected.append(Rejection(str(p), 0, f"missing price file for {t.code}"))
            continue
        prices[t.code] = _read_prices(p, t.code, rejected)
    if price_dir.exists():
        for p in sorted(price_dir.glob("*.csv")):
            if p.stem not in codes:
                rejected.append(Rejection(str(p), 0, f"ticker {p.stem!r} not in universe"))

    statements = _read_statements(root / "statements.jsonl", codes, rejected)
    news_items, news = _read_news(root / "news.jsonl", codes, rejected)
    macro = _read_macro(root / "macro.jsonl", rejected)

    days = np.concatenate([s.dates for s in prices.values()]) if prices else np.array([], dtype="datetime64[D]")
    for r in rejected:
        logger.warning("rejected row %s", r)
    return DataRepository(
        universe=universe,
        calendar=TradingCalendar(days),
        prices=prices,
        statements=statements,
        news=news,
        macro=macro,
        rejected=tuple(rejected),
        news_items=news_items,
    )


# ---------------------------------------------------------------------------
# canonical serialization

def _jnum(x):
    return None if is_missing(x) else float(x)


def dump_repository(repo, root) -> None:
    """Write ``repo`` as canonical fixture files (loading them back is byte-stable)."""
    root = Path(root)
    (root / "prices").mkdir(parents=True, exist_ok=True)
    uni = [{"code": t.code, "sector": t.sector} for t in repo.universe]
    (root / "universe.json").write_text(json.dumps(uni, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    for code, s in sorted(repo.prices.items()):
        buf = io.StringIO()
        buf.write("date,open,close\n")
        for d, o, c in zip(s.dates, s.opens, s.closes):
            buf.write(f"{d.item().isoformat()},{float(o)!r},{float(c)!r}\n")
        (root / "prices" / f"{code}.csv").write_text(buf.getvalue(), encoding="utf-8")

    recs = sorted(
        (r for rs in repo.statements.values() for r in rs),
        key=lambda r: (r.ticker, r.period_end, r.publish_date, r.months),
    )
    lines = []
    for r in recs:
        obj = {
            "ticker": r.ticker,
            "period_type": r.period_type,
            "period_end": r.period_end.isoformat(),
            "publish_date": r.publish_date.isoformat(),
            **{k: _jnum(r.get(k)) for k in LINE_ITEMS},
        }
        if r.texts:
            obj["texts"] = dict(r.texts)
        lines.append(json.dumps(obj, sort_keys=True, ensure_ascii=False))
    (root / "statements.jsonl").write_text("".join(l + "\n" for l in lines), encoding="utf-8")

    lines = [
        json.dumps({"ticker_matches": list(n.ticker_matches), "date": n.date.isoformat(),
                    "headline": n.headline, "summary": n.summary}, sort_keys=True, ensure_ascii=False)
        for n in repo.news_items
    ]
    (root / "news.jsonl").write_text("".join(l + "\n" for l in lines), encoding="utf-8")

    lines = []
    for month in sorted(repo.macro):
        snap = repo.macro[month]
        ind = {k: {"level": _jnum(v[0]), "mom_roc": _jnum(v[1])} for k, v in snap.indicators.items()}
        lines.append(json.dumps({"as_of": month, "indicators": ind}, sort_keys=True))
    (root / "macro.jsonl").write_text("".join(l + "\n" for l in lines), encoding="utf-8")


# ---------------------------------------------------------------------------
# schedule and slicing

def rebalance_schedule(calendar: TradingCalendar, start_month: str, end_month: str) -> list[tuple[dt.date, dt.date]]:
    """(decision_date, execution_date) per decision month in ``[start_month, end_month]``.

    The decision date is the month's last business day; execution happens at the
    open of the first business day of the following month.
    """
    if start_month > end_month:
        raise ValueError(f"start {start_month} after end {end_month}")
    out = []
    for m in month_range(start_month, end_month):
        out.append((calendar.last_in_month(m), calendar.first_in_month(add_months(m, 1))))
    return out


def slice_asof(repo, decision_date) -> DataView:
    d = parse_date(decision_date)
    m = month_of(d)
    return DataView(
        asof=d,
        universe=repo.universe,
        calendar=repo.calendar.truncate(d),
        prices={c: s.truncate(d) for c, s in repo.prices.items()},
        statements={c: tuple(r for r in rs if r.publish_date <= d) for c, rs in repo.statements.items()},
        news={c: tuple(n for n in ns if n.date <= d) for c, ns in repo.news.items()},
        macro={k: v for k, v in repo.macro.items() if k <= m},
    )
