import datetime as dt

import numpy as np
import pytest

from finegrain.marketdata import PriceBar, PriceSeries, rebalance_schedule
from finegrain.synthetic import business_days, default_window, make_repository


def series_from_closes(closes, start=dt.date(2020, 1, 1), opens=None, ticker="T"):
    days = business_days(start, start + dt.timedelta(days=3 * len(closes) + 10))[: len(closes)]
    opens = closes if opens is None else opens
    return PriceSeries.from_bars(ticker, [PriceBar(d, float(o), float(c)) for d, o, c in zip(days, opens, closes)])


@pytest.fixture(scope="session")
def repo():
    return make_repository()


@pytest.fixture(scope="session")
def window(repo):
    return default_window(repo)


@pytest.fixture(scope="session")
def schedule(repo, window):
    return rebalance_schedule(repo.calendar, *window)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
