"""The three-level agent hierarchy for one month: analysts, sector specialist and macro, portfolio manager."""

from __future__ import annotations

import logging
import statistics
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from ..fundamentals import coarse_pack, fine_metrics, latest_balance_sheet, info_updated, sector_averages
from ..indicators import coarse_window, fine_features
from ..marketdata import DataView
from ..util import month_of
from .backends import BackendError, RequestContext
from .prompts import (GRANULARITIES, MacroInput, NewsInput, PMInput, PromptRenderer, QualitativeInput,
                      QuantInput, SectorInput, TechnicalInput)
from .reports import LEVEL1_ROLES, ReportParseError, fallback_report, parse_report
from .transcripts import TranscriptRecord, TranscriptStore

log = logging.getLogger(__name__)

MASKABLE = ("technical", "quantitative", "qualitative", "news", "macro")
CORRECTION = ("\n\nYour previous reply could not be used. Answer again with exactly one JSON object "
              "in the requested format, with every score inside its allowed range.")


@dataclass(frozen=True)
class AblationMask:
    excluded: frozenset = frozenset()

    def __post_init__(self):
        bad = set(self.excluded) - set(MASKABLE)
        if bad:
            raise ValueError(f"cannot exclude {sorted(bad)}; maskable roles are {MASKABLE}")
        object.__setattr__(self, "excluded", frozenset(self.excluded))

    @property
    def name(self) -> str:
        return "none" if not self.excluded else "no_" + "_".join(sorted(self.excluded))

    def includes(self, role: str) -> bool:
        return role not in self.excluded

    @classmethod
    def parse(cls, name: str) -> "AblationMask":
        if name in ("none", "", "baseline"):
            return cls()
        if name.startswith("no_"):
            name = name[3:]
        return cls(frozenset(name.split("_")))

    @classmethod
    def leave_one_out(cls) -> list["AblationMask"]:
        """Baseline plus one mask per maskable role."""
        return [cls()] + [cls(frozenset([r])) for r in MASKABLE]


def median_scores(trials) -> dict:
    """Per-ticker median over trial score maps; even counts average the two central values."""
    trials = list(trials)
    if not trials:
        raise ValueError("no trials")
    tickers = set(trials[0])
    for t in trials[1:]:
        if set(t) != tickers:
            raise ValueError("trials cover different tickers")
    return {k: float(statistics.median(t[k] for t in trials)) for k in sorted(tickers)}


class AgentPipeline:
    """Runs the hierarchy through a backend, persisting every exchange to ``store``.

    ``max_workers`` > 1 runs tickers of a month concurrently; results do not
    depend on scheduling because every request carries its explicit key.
    """

    def __init__(self, backend, store: TranscriptStore | None = None, renderer: PromptRenderer | None = None,
                 trial: int = 0, max_workers: int = 1):
        self.backend = backend
        self.store = store if store is not None else TranscriptStore()
        self.renderer = renderer or PromptRenderer()
        self.trial = trial
        self.max_workers = max_workers
        self._lock = threading.Lock()
        self.backend_failures = 0
        self.fallbacks = 0

    # one agent call -----------------------------------------------------

    def call(self, role: str, granularity: str, month: str, ticker: str | None, system: str, user: str):
        exchanges = []
        report = None
        error: Exception | None = None
        for attempt in range(2):
            prompt = user if attempt == 0 else user + CORRECTION
            ctx = RequestContext(role, month, granularity, ticker, self.trial, attempt)
            try:
                out = self.backend.send(system, prompt, ctx)
            except BackendError as e:
                error = e
                with self._lock:
                    self.backend_failures += 1
                break
            exchanges.append({"system": system, "user": prompt, "output": out})
            try:
                report = parse_report(role, out, ticker=ticker, month=month, granularity=granularity)
                break
            except ReportParseError as e:
                error = e
        if report is None:
            raw = exchanges[-1]["output"] if exchanges else ""
            report = fallback_report(role, raw, ticker=ticker, month=month, granularity=granularity, error=error)
            with self._lock:
                self.fallbacks += 1
        if not exchanges:  # keep the prompt even when the backend never answered
            exchanges.append({"system": system, "user": user, "output": ""})
        self.store.append(TranscriptRecord(month, role, ticker, granularity, self.trial, tuple(exchanges), report))
        return report

    # levels ---------------------------------------------------------------

    def run_level1(self, view: DataView, ticker: str, month: str, granularity: str,
                   mask: AblationMask = AblationMask(), pack=None) -> dict:
        if ticker not in view.tickers:
            raise KeyError(f"{ticker} not in universe")
        if granularity not in GRANULARITIES:
            raise ValueError(f"granularity must be fine or coarse, got {granularity!r}")
        asof = view.asof
        prices = view.prices[ticker]
        stmts = view.statements.get(ticker, ())
        filing = latest_balance_sheet(stmts, asof)
        out = {}
        for role in LEVEL1_ROLES:
            if not mask.includes(role):
                continue
            if role == "technical":
                feats = fine_features(prices, asof) if granularity == "fine" else coarse_window(prices, asof)
                inp = TechnicalInput(ticker, asof, feats)
            elif role == "quantitative":
                if pack is None:
                    pack = _pack(view, ticker, granularity)
                inp = QuantInput(ticker, asof, pack, filing)
            elif role == "qualitative":
                inp = QualitativeInput(ticker, asof, filing, info_updated(stmts, asof))
            else:
                m = month_of(asof)
                items = tuple(n for n in view.news.get(ticker, ()) if month_of(n.date) == m and n.date <= asof)
                inp = NewsInput(ticker, asof, items)
            system, user = self.renderer.render(role, granularity, inp)
            out[role] = self.call(role, granularity, month, ticker, system, user)
        return out

    def run_sector(self, level1: dict, sector_context, granularity: str, *, ticker: str, sector: str,
                   month: str, asof):
        target, average = sector_context
        inp = SectorInput(ticker, sector, asof, dict(level1), target, average)
        system, user = self.renderer.render("sector", granularity, inp)
        return self.call("sector", granularity, month, ticker, system, user)

    def run_macro(self, snapshot, *, month: str, asof, granularity: str):
        system, user = self.renderer.render("macro", None, MacroInput(month, asof, snapshot))
        return self.call("macro", granularity, month, None, system, user)

    def run_pm(self, sector_report, macro_report, *, ticker: str, month: str, asof, granularity: str):
        system, user = self.renderer.render("pm", None, PMInput(ticker, asof, sector_report, macro_report))
        return self.call("pm", granularity, month, ticker, system, user)

    def run_month(self, view: DataView, month: str, granularity: str, mask: AblationMask = AblationMask()) -> dict:
        """Final PM score per ticker for one decision month."""
        if month_of(view.asof) != month:
            raise ValueError(f"view is as of {view.asof}, not in decision month {month}")
        tickers = view.tickers
        packs = {t: _pack(view, t, granularity) for t in tickers}
        averages = sector_averages(packs, view.universe)
        macro = None
        if mask.includes("macro"):
            macro = self.run_macro(view.macro_snapshot(), month=month, asof=view.asof, granularity=granularity)

        def one(ticker):
            sector = view.sector_of(ticker)
            l1 = self.run_level1(view, ticker, month, granularity, mask, pack=packs[ticker])
            sec = self.run_sector(l1, (packs[ticker], averages[sector]), granularity, ticker=ticker,
                                  sector=sector, month=month, asof=view.asof)
            pm = self.run_pm(sec, macro, ticker=ticker, month=month, asof=view.asof, granularity=granularity)
            return ticker, pm.score

        if self.max_workers > 1:
            with ThreadPoolExecutor(self.max_workers) as pool:
                results = list(pool.map(one, tickers))
        else:
            results = [one(t) for t in tickers]
        return dict(sorted(results))


def _pack(view: DataView, ticker: str, granularity: str):
    stmts = view.statements.get(ticker, ())
    prices = view.prices[ticker]
    return fine_metrics(stmts, prices, view.asof) if granularity == "fine" else coarse_pack(stmts, prices, view.asof)
