"""
Monthly long-short backtest
===========================

Scores every month with the agent pipeline, builds an equal-weight
market-neutral book, and compares it with an oracle that peeks at the
realised returns (useful only as an upper bound).
"""

from finegrain.agents import AgentPipeline, ForesightScript, ScriptedBackend, TranscriptStore
from finegrain.marketdata import rebalance_schedule
from finegrain.portfolio import holding_periods, run_backtest
from finegrain.synthetic import default_window, make_repository
from finegrain.util import month_of

repo = make_repository()
schedule = rebalance_schedule(repo.calendar, *default_window(repo))


def agents(policy=None):
    def provide(view, month):
        return AgentPipeline(ScriptedBackend(policy), TranscriptStore()).run_month(view, month, "coarse")
    return provide


scripted = run_backtest(repo, schedule, agents(), n=4, cost_bps=10)
print("scripted agents:", {k: round(v, 3) for k, v in scripted.stats("net").items()})

forward = {month_of(d): {t: repo.prices[t].open_on(n) / repo.prices[t].open_on(e) - 1 for t in repo.tickers}
           for d, e, n in holding_periods(repo.calendar, schedule)}
oracle = run_backtest(repo, schedule, agents(ForesightScript(forward)), n=4, cost_bps=10)
print("foresight bound:", {k: round(v, 3) for k, v in oracle.stats("net").items()})
print(oracle.to_csv())
