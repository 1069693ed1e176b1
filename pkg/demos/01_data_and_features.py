"""
Point-in-time data and the two views of a stock
================================================

Build the synthetic market, cut it at a decision date, and look at one
ticker the way the fine-grained and the coarse-grained analysts see it.
"""

from finegrain.fundamentals import coarse_pack, fine_metrics
from finegrain.indicators import coarse_window, fine_features
from finegrain.marketdata import rebalance_schedule, slice_asof
from finegrain.synthetic import default_window, make_repository

repo = make_repository()
schedule = rebalance_schedule(repo.calendar, *default_window(repo))
decision, execution = schedule[0]
print(f"{len(repo.tickers)} tickers; first decision {decision}, trade at the open on {execution}")

# Everything after the decision date disappears from the view.
view = slice_asof(repo, decision)
code = view.tickers[0]
print(f"prices visible up to {view.prices[code].dates[-1]}, "
      f"{len(view.statements[code])} filings published so far")

# Fine-grained: pre-computed indicators.
feats = fine_features(view.prices[code], decision)
for name, value in feats.as_dict().items():
    print(f"  {name:>14}: {value:.4g}")

# Coarse-grained: a year of raw closes, most recent first.
window = coarse_window(view.prices[code], decision)
print(f"coarse window holds {len(window.closes)} closes, latest {window.closes[0]}")

# Fundamentals, fine versus coarse.
fine = fine_metrics(view.statements[code], view.prices[code], decision)
coarse = coarse_pack(view.statements[code], view.prices[code], decision)
print("ROE", round(fine.values["roe"], 4), "| month change", round(fine.changes["roe"], 4))
print("sales (TTM)", coarse.values["sales"], "| month RoC %", round(coarse.changes["sales"], 3))
