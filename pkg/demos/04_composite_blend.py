"""
Risk-parity composite and the index blend
=========================================

Solves equal risk contributions for a few strategy books, then sweeps
the allocation between an index and a composite whose returns are only
loosely correlated with it.
"""

import numpy as np

from finegrain.optimizer import blend_summary, blend_sweep, erc_weights
from finegrain.synthetic import correlated_streams

S = np.array([[0.04, 0.01, 0.00],
              [0.01, 0.09, 0.02],
              [0.00, 0.02, 0.16]])
sol = erc_weights(S)
print("weights", np.round(sol.w, 4), "risk contributions", np.round(sol.risk_contributions, 5))

index, composite = correlated_streams(120, 0.4, mean=0.006, vol=0.04, seed=11)
points = blend_sweep(index, composite, cost_bps=0)
for p in points:
    bar = "#" * int(40 * p.gross["ann_sharpe"])
    print(f"a={p.allocation:.1f}  Sharpe {p.gross['ann_sharpe']:.3f} {bar}")
print(blend_summary(points)["rows"]["50-50 Combined"])
