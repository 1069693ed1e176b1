"""Small shared helpers: missing-value handling, month arithmetic, number formatting."""

from __future__ import annotations

import calendar
import datetime as dt
import math

MISSING = float("nan")


def is_missing(x) -> bool:
    return x is None or (isinstance(x, float) and math.isnan(x))


def to_float(x) -> float:
    """Coerce ``None`` and non-finite values to the NaN missing-marker."""
    if x is None:
        return MISSING
    x = float(x)
    return x if math.isfinite(x) else MISSING


def safe_div(num: float, den: float) -> float:
    if is_missing(num) or is_missing(den) or den == 0:
        return MISSING
    return num / den


def pct_change(cur: float, prev: float) -> float:
    """Percent change measured against ``|prev|``; missing when prev is missing or zero."""
    if is_missing(cur) or is_missing(prev) or prev == 0:
        return MISSING
    return 100.0 * (cur - prev) / abs(prev)


def parse_date(s) -> dt.date:
    if isinstance(s, dt.date):
        return s
    return dt.date.fromisoformat(str(s))


# Months are "YYYY-MM" strings throughout: sortable, hashable, JSON-native.

def month_of(d: dt.date) -> str:
    return f"{d.year:04d}-{d.month:02d}"


def parse_month(m: str) -> tuple[int, int]:
    y, mo = str(m).split("-")[:2]
    y, mo = int(y), int(mo)
    if not 1 <= mo <= 12:
        raise ValueError(f"bad month {m!r}")
    return y, mo


def add_months(m: str, k: int) -> str:
    y, mo = parse_month(m)
    idx = y * 12 + (mo - 1) + k
    return f"{idx // 12:04d}-{idx % 12 + 1:02d}"


def month_range(start: str, end: str) -> list[str]:
    out = []
    m = start
    while m <= end:
        out.append(m)
        m = add_months(m, 1)
    return out


def month_end(m: str) -> dt.date:
    y, mo = parse_month(m)
    return dt.date(y, mo, calendar.monthrange(y, mo)[1])


def shift_date_months(d: dt.date, k: int) -> dt.date:
    """Same calendar day ``k`` months away, clamped to the month's last day."""
    y, mo = parse_month(add_months(month_of(d), k))
    return dt.date(y, mo, min(d.day, calendar.monthrange(y, mo)[1]))


def fmt_num(x) -> str:
    """Fixed 4-significant-digit rendering; missing values become the literal ``NaN``."""
    if is_missing(x):
        return "NaN"
    x = float(x)
    if x == 0:
        return "0"
    return f"{x:.4g}"
