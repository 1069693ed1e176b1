"""
What the analysts talk about
============================

Collects rationales from fine and coarse runs, ranks the words that set
them apart, and measures how closely each analyst's text is echoed by the
sector specialist.
"""

from finegrain.agents import AgentPipeline, ScriptedBackend, TranscriptStore
from finegrain.analysis import OfflineEmbedder, TokenCorpus, log_odds, propagation_report, top_k
from finegrain.marketdata import rebalance_schedule, slice_asof
from finegrain.synthetic import default_window, make_repository
from finegrain.util import month_of

repo = make_repository()
store = TranscriptStore()
pipeline = AgentPipeline(ScriptedBackend(), store)
for decision, _ in rebalance_schedule(repo.calendar, *default_window(repo))[:6]:
    for gran in ("fine", "coarse"):
        pipeline.run_month(slice_asof(repo, decision), month_of(decision), gran)

texts = {g: [r.report.reason for r in store.records() if r.granularity == g] for g in ("fine", "coarse")}
result = log_odds(TokenCorpus.from_texts("fine", texts["fine"]), TokenCorpus.from_texts("coarse", texts["coarse"]))
fine_words, coarse_words = top_k(result, 5)
print("leaning fine:  ", fine_words)
print("leaning coarse:", coarse_words)

report = propagation_report(store, OfflineEmbedder())
for role, row in report.rows.items():
    print(f"{role:>12}: " + ", ".join(f"{k} {v:+.3f}" for k, v in row.items()))
