"""
One month through the agent hierarchy
=====================================

Runs analysts, sector specialist, macro and portfolio manager for every
ticker with the deterministic scripted backend, then prints one prompt
and the scores the manager produced.
"""

from finegrain.agents import AblationMask, AgentPipeline, ScriptedBackend, TranscriptStore, mask_violations
from finegrain.marketdata import rebalance_schedule, slice_asof
from finegrain.synthetic import default_window, make_repository
from finegrain.util import month_of

repo = make_repository()
decision, _ = rebalance_schedule(repo.calendar, *default_window(repo))[0]
month = month_of(decision)
view = slice_asof(repo, decision)

store = TranscriptStore()
pipeline = AgentPipeline(ScriptedBackend(), store)
scores = pipeline.run_month(view, month, "fine")
print("manager scores:", scores)
print(len(store), "transcripts recorded")

sector_prompt = next(r for r in store.records() if r.role == "sector").exchanges[0]["user"]
print(sector_prompt[:900])

# Dropping the news analyst removes it from every downstream prompt too.
masked = TranscriptStore()
AgentPipeline(ScriptedBackend(), masked).run_month(view, month, "fine", AblationMask(frozenset(["news"])))
print("mask problems:", mask_violations(masked.records(), {"news"}))
