import datetime as dt
import json
import math

import numpy as np
import pytest

from finegrain.marketdata import (CalendarGapError, DataError, TradingCalendar, dump_repository, load_repository,
                                  rebalance_schedule, slice_asof)
from finegrain.synthetic import write_fixture
from finegrain.util import add_months, fmt_num, month_of, pct_change, shift_date_months


@pytest.fixture
def fixture_dir(tmp_path):
    write_fixture(tmp_path / "data")
    return tmp_path / "data"


def test_round_trip_is_byte_stable(fixture_dir, tmp_path):
    repo = load_repository(fixture_dir)
    assert repo.rejected == ()
    dump_repository(repo, tmp_path / "again")
    for name in ("universe.json", "statements.jsonl", "news.jsonl", "macro.jsonl"):
        assert (fixture_dir / name).read_bytes() == (tmp_path / "again" / name).read_bytes()
    for p in sorted((fixture_dir / "prices").glob("*.csv")):
        assert p.read_bytes() == (tmp_path / "again" / "prices" / p.name).read_bytes()


def test_missing_universe_is_fatal(tmp_path):
    with pytest.raises(DataError, match="universe"):
        load_repository(tmp_path)


def test_empty_universe_is_fatal(tmp_path):
    (tmp_path / "universe.json").write_text("[]")
    with pytest.raises(DataError, match="non-empty"):
        load_repository(tmp_path)


def test_malformed_price_row_names_file_and_line(fixture_dir):
    p = sorted((fixture_dir / "prices").glob("*.csv"))[0]
    lines = p.read_text().splitlines()
    lines[3] = lines[3].split(",")[0] + ",abc,1.0"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError) as e:
        load_repository(fixture_dir)
    assert f"{p}:4" in str(e.value)


def test_duplicate_price_date_is_fatal(fixture_dir):
    p = sorted((fixture_dir / "prices").glob("*.csv"))[0]
    lines = p.read_text().splitlines()
    lines.insert(3, lines[2])
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match="duplicate price date"):
        load_repository(fixture_dir)


def test_invariant_violations_are_rejected_not_fatal(fixture_dir):
    stm = fixture_dir / "statements.jsonl"
    rows = [json.loads(l) for l in stm.read_text().splitlines()]
    rows[0]["publish_date"] = "1990-01-01"  # before period end
    rows[1]["ticker"] = "9999"
    rows[2]["issued_shares"] = 0
    stm.write_text("".join(json.dumps(r) + "\n" for r in rows))
    news = fixture_dir / "news.jsonl"
    news.write_text(news.read_text() + json.dumps({"ticker_matches": ["1001"], "date": "2023-01-05",
                                                   "headline": " ", "summary": ""}) + "\n")
    repo = load_repository(fixture_dir)
    reasons = sorted(r.reason for r in repo.rejected)
    assert len(reasons) == 4
    assert any("precedes" in r for r in reasons)
    assert any("not in universe" in r for r in reasons)
    assert any("issued_shares" in r for r in reasons)
    assert any("headline" in r for r in reasons)
    assert all(r.line > 0 for r in repo.rejected)


def test_nonpositive_price_rejected(fixture_dir):
    p = sorted((fixture_dir / "prices").glob("*.csv"))[0]
    lines = p.read_text().splitlines()
    d = lines[5].split(",")[0]
    lines[5] = f"{d},-1.0,10.0"
    p.write_text("\n".join(lines) + "\n")
    repo = load_repository(fixture_dir)
    assert [r.line for r in repo.rejected] == [6]


def test_macro_roc_filled_from_prior_level(fixture_dir):
    path = fixture_dir / "macro.jsonl"
    rows = [json.loads(l) for l in path.read_text().splitlines()]
    rows[3]["indicators"]["gold"]["mom_roc"] = None
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    repo = load_repository(fixture_dir)
    snap = repo.macro[rows[3]["as_of"]]
    prev = repo.macro[rows[2]["as_of"]]
    assert snap.indicators["gold"][1] == pytest.approx(pct_change(snap.indicators["gold"][0], prev.indicators["gold"][0]))


def test_unknown_macro_indicator_rejected(fixture_dir):
    path = fixture_dir / "macro.jsonl"
    rows = [json.loads(l) for l in path.read_text().splitlines()]
    rows[0]["indicators"]["bitcoin"] = {"level": 1.0, "mom_roc": None}
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    repo = load_repository(fixture_dir)
    assert len(repo.rejected) == 1 and "bitcoin" in repo.rejected[0].reason


def test_schedule_decision_and_execution(repo, window):
    sched = rebalance_schedule(repo.calendar, *window)
    assert len(sched) == 12
    for dec, exe in sched:
        assert dec == repo.calendar.last_in_month(month_of(dec))
        assert exe == repo.calendar.first_in_month(add_months(month_of(dec), 1))
        assert dec < exe


def test_schedule_gap_raises():
    days = [dt.date(2024, 1, 31), dt.date(2024, 3, 1)]
    cal = TradingCalendar(days)
    with pytest.raises(CalendarGapError):
        rebalance_schedule(cal, "2024-01", "2024-02")


def test_slice_asof_hides_future(repo, schedule):
    dec = schedule[3][0]
    view = slice_asof(repo, dec)
    for code in view.tickers:
        assert view.prices[code].dates[-1] <= np.datetime64(dec)
        assert all(r.publish_date <= dec for r in view.statements[code])
        assert all(n.date <= dec for n in view.news[code])
    assert max(view.macro) <= month_of(dec)
    assert view.calendar.as_dates()[-1] <= dec


def test_util_helpers():
    assert fmt_num(float("nan")) == "NaN"
    assert fmt_num(0.0) == "0"
    assert fmt_num(123456.0) == "1.235e+05"
    assert fmt_num(0.012345) == "0.01235"
    assert shift_date_months(dt.date(2024, 3, 31), -1) == dt.date(2024, 2, 29)
    assert add_months("2024-01", -1) == "2023-12"
    assert math.isnan(pct_change(1.0, 0.0))
    assert pct_change(-5.0, -10.0) == 50.0
