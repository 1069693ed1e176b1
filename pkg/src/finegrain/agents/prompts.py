"""Prompt rendering from versioned text templates.

Templates live under ``templates/<version>/<locale>/`` and use ``string.Template``
placeholders. Numbers are rendered with four significant digits and missing
values as the literal ``NaN`` so identical inputs always give identical bytes.
"""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from string import Template

from ..fundamentals import CoarsePack, FineMetricPack, SectorAverage
from ..indicators import RawPriceWindow, TechnicalFeatureSet
from ..marketdata import MacroSnapshot, StatementRecord
from ..util import fmt_num, is_missing
from .reports import AgentReport

GRANULARITIES = ("fine", "coarse")

ROLE_LABELS = {
    "technical": "Technical Analyst",
    "quantitative": "Quant Fundamental Analyst",
    "qualitative": "Qualitative Strategic Analyst",
    "news": "News Analyst",
}
_ROLE_WORDS = {"technical": "Technical", "quantitative": "Quantitative", "qualitative": "Qualitative", "news": "News"}

FINE_LABELS = (
    ("Profitability", (("net_margin", "Net Margin"), ("roa", "ROA"), ("roe", "ROE"),
                       ("asset_turnover", "Asset Turn"), ("inventory_turn_days", "Inv. Turn Days"))),
    ("Value", (("per", "PER"),)),
    ("Cash Flow", (("fcf", "FCF"), ("fcf_margin", "FCF Margin"), ("ebitda", "EBITDA"))),
    ("Health", (("equity_ratio", "Equity Ratio"), ("quick_ratio", "Quick Ratio"), ("de_ratio", "D/E Ratio"))),
    ("Growth", (("sales_yoy", "Sales YoY"), ("sales_cagr_3y", "CAGR 3Y"), ("eps_growth", "EPS Growth"), ("dps", "DPS"))),
)
COARSE_LABELS = (
    ("P/L", (("sales", "Sales"), ("cost_of_sales", "Cost of Sales"), ("operating_profit", "Op Profit"),
             ("net_income", "Net Income"), ("depreciation", "Depreciation"))),
    ("B/S: Assets", (("total_assets", "Total Assets"), ("cash", "Cash"), ("receivables", "Receivables"),
                     ("inventory", "Inventory"), ("financial_assets", "Financial Assets"))),
    ("B/S: Liab/Eq", (("equity", "Equity"), ("interest_bearing_debt", "Debt"),
                      ("current_liabilities", "Cur. Liabilities"))),
    ("Cash Flow", (("operating_cf", "Op CF"), ("investing_cf", "Inv CF"))),
    ("Others", (("dividends_per_share", "Dividends"), ("issued_shares", "Issued Shares"),
                ("monthly_close", "Monthly Close"))),
)
MACRO_LABELS = (
    ("1. Rates & Policy", (("us_fed_funds", "US Fed Rate"), ("us_10y", "US 10Y Yield"),
                           ("jp_policy_rate", "JP Policy Rate"), ("jp_10y", "JP 10Y Yield"))),
    ("2. Inflation & Commodities", (("us_cpi", "US CPI"), ("jp_cpi", "JP CPI"), ("gold", "Gold"),
                                    ("crude_oil", "Crude Oil"))),
    ("3. Growth & Economy", (("us_payrolls", "US Payrolls"), ("industrial_production", "Ind. Prod"),
                             ("housing_starts", "Housing Starts"), ("unemployment", "Unemp. Rate"),
                             ("jp_business_conditions", "JP Business Index"))),
    ("4. Market & Risk", (("usd_jpy", "USD/JPY"), ("nikkei225", "Nikkei 225"), ("sp500", "S&P 500"),
                          ("us_vix", "US VIX"), ("nikkei_vi", "Nikkei VI"))),
)


class PromptInputError(TypeError):
    """The inputs handed to a role do not match what its template needs."""


# --- per-role inputs -------------------------------------------------------

@dataclass(frozen=True)
class TechnicalInput:
    ticker: str
    asof: dt.date
    features: TechnicalFeatureSet | RawPriceWindow


@dataclass(frozen=True)
class QuantInput:
    ticker: str
    asof: dt.date
    pack: FineMetricPack | CoarsePack
    filing: StatementRecord | None = None


@dataclass(frozen=True)
class QualitativeInput:
    ticker: str
    asof: dt.date
    filing: StatementRecord | None
    info_updated: bool = False


@dataclass(frozen=True)
class NewsInput:
    ticker: str
    asof: dt.date
    items: tuple = ()


@dataclass(frozen=True)
class SectorInput:
    ticker: str
    sector: str
    asof: dt.date
    reports: dict  # level-1 role -> AgentReport (excluded roles absent)
    target: FineMetricPack | CoarsePack
    average: SectorAverage


@dataclass(frozen=True)
class MacroInput:
    month: str
    asof: dt.date
    snapshot: MacroSnapshot | None


@dataclass(frozen=True)
class PMInput:
    ticker: str
    asof: dt.date
    sector_report: AgentReport
    macro_report: AgentReport | None = None


# --- renderer ---------------------------------------------------------------

def _yes(flag: bool) -> str:
    return "Yes" if flag else "No"


def _pct(x) -> str:
    return "NaN" if is_missing(x) else f"{fmt_num(x)}%"


def _join_words(words: list[str]) -> str:
    if len(words) <= 1:
        return "".join(words)
    return ", ".join(words[:-1]) + " and " + words[-1]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


@dataclass
class PromptRenderer:
    version: str = "v1"
    locale: str = "en"
    language: str = "Japanese"
    lengths: dict = field(default_factory=lambda: {
        "reason_chars": 50, "insight_chars": 150, "news_chars": 100,
        "thesis_words": 200, "summary_chars": 200, "rationale_chars": "150-200",
    })

    def __post_init__(self):
        self._cache: dict[str, Template] = {}

    def template(self, name: str) -> Template:
        if name not in self._cache:
            path = resources.files("finegrain.agents") / "templates" / self.version / self.locale / f"{name}.txt"
            self._cache[name] = Template(path.read_text(encoding="utf-8"))
        return self._cache[name]

    def _fill(self, name: str, **kw) -> str:
        text = self.template(name).substitute(language=self.language, **kw)
        return re.sub(r"\n{3,}", "\n\n", text).rstrip("\n") + "\n"

    # roles ---------------------------------------------------------------

    def technical(self, granularity: str, inp: TechnicalInput):
        system = self._fill("technical_system")
        f = inp.features
        if granularity == "fine":
            if not isinstance(f, TechnicalFeatureSet):
                raise PromptInputError("fine technical prompt needs a TechnicalFeatureSet")
            rd, rm = f.roc_days, f.roc_months
            data = "\n".join([
                f"RoC 5day: {_pct(rd.get(5))} | RoC 10day: {_pct(rd.get(10))}",
                f"RoC 20day: {_pct(rd.get(20))} | RoC 1Month: {_pct(rm.get(1))}",
                f"RoC 3Month: {_pct(rm.get(3))} | RoC 6Month: {_pct(rm.get(6))}",
                f"RoC 12Month: {_pct(rm.get(12))}",
                f"Bollinger Z: {fmt_num(f.bollinger_z)}",
                f"RSI: {fmt_num(f.rsi)}",
                f"MACD: {fmt_num(f.macd_norm)} | Signal: {fmt_num(f.signal_norm)} | Hist: {fmt_num(f.hist_norm)}",
                f"Stochastic %K: {fmt_num(f.pct_k)} | %D: {fmt_num(f.pct_d)} | %J: {fmt_num(f.j)}",
            ])
            user = self._fill("technical_user_fine", ticker=inp.ticker, asof=inp.asof.isoformat(), data=data,
                              reason_chars=self.lengths["reason_chars"])
        else:
            if not isinstance(f, RawPriceWindow):
                raise PromptInputError("coarse technical prompt needs a RawPriceWindow")
            note = (f" Only {len(f.closes)} business days of history are available." if f.short_history else "")
            user = self._fill("technical_user_coarse", ticker=inp.ticker, asof=inp.asof.isoformat(),
                              window_len=len(f.closes), short_note=note,
                              prices=", ".join(fmt_num(p) for p in f.closes),
                              reason_chars=self.lengths["reason_chars"])
        return system, user

    def _filing_line(self, filing: StatementRecord | None) -> str:
        if filing is None:
            return "Latest filing: NaN"
        return (f"Latest filing: {filing.period_type} period ended {filing.period_end.isoformat()}, "
                f"published {filing.publish_date.isoformat()}")

    def quantitative(self, granularity: str, inp: QuantInput):
        system = self._fill("quantitative_system")
        p = inp.pack
        if granularity == "fine":
            if not isinstance(p, FineMetricPack):
                raise PromptInputError("fine quantitative prompt needs a FineMetricPack")
            lines = [f"Info update month: {_yes(p.info_updated)}", self._filing_line(inp.filing)]
            for group, items in FINE_LABELS:
                cells = [f"{label}: {fmt_num(p.values[k])} (diff: {fmt_num(p.changes[k])})" for k, label in items]
                lines.append(f"[{group}] " + " | ".join(cells))
            user = self._fill("quantitative_user_fine", ticker=inp.ticker, asof=inp.asof.isoformat(),
                              data="\n".join(lines), reason_chars=self.lengths["reason_chars"])
        else:
            if not isinstance(p, CoarsePack):
                raise PromptInputError("coarse quantitative prompt needs a CoarsePack")
            lines = [f"Info update: {_yes(p.info_updated)}", self._filing_line(inp.filing)]
            for group, items in COARSE_LABELS:
                cells = [f"{label}: {fmt_num(p.values[k])} (RoC: {_pct(p.changes[k])})" for k, label in items]
                lines.append(f"[{group}] " + " | ".join(cells))
                if group == "P/L":
                    lines.append(f"[EPS] Current: {fmt_num(p.values['eps'])} (RoC: {_pct(p.changes['eps'])}) | "
                                 f"1y Ago: {fmt_num(p.eps_1y_ago)} | 3y Ago: {fmt_num(p.eps_3y_ago)}")
            user = self._fill("quantitative_user_coarse", ticker=inp.ticker, asof=inp.asof.isoformat(),
                              data="\n".join(lines), reason_chars=self.lengths["reason_chars"])
        return system, user

    def qualitative(self, inp: QualitativeInput):
        system = self._fill("qualitative_system")
        f = inp.filing
        texts = f.texts if f is not None else {}
        lines = [f"Info update: {_yes(inp.info_updated)}", self._filing_line(f)]
        for key, label in (("overview", "1. Overview"), ("risks", "2. Risks"), ("mdna", "3. MD&A"),
                           ("governance", "4. Governance")):
            lines.append(f"[{label}] {texts.get(key) or 'NaN'}")
        user = self._fill("qualitative_user", ticker=inp.ticker, asof=inp.asof.isoformat(), data="\n".join(lines),
                          insight_chars=self.lengths["insight_chars"])
        return system, user

    def news(self, inp: NewsInput):
        system = self._fill("news_system")
        if inp.items:
            data = "\n".join(f"{n.date.isoformat()}: {n.headline} / {n.summary or 'NaN'}" for n in inp.items)
        else:
            data = "NaN"
        user = self._fill("news_user", ticker=inp.ticker, asof=inp.asof.isoformat(), data=data,
                          reason_chars=self.lengths["news_chars"])
        return system, user

    def _report_line(self, role: str, r: AgentReport) -> str:
        s = r.scores
        if role == "qualitative":
            head = (f"business momentum {s['business_momentum']}/5, risk severity {s['risk_severity']}/5, "
                    f"management trust {s['management_trust']}/5")
        elif role == "news":
            head = f"return outlook {s['return_outlook']}/5, risk outlook {s['risk_outlook']}/5"
        else:
            head = f"score {s['score']}/100"
        return f"- {ROLE_LABELS[role]}: {head} | {r.reason}"

    def sector(self, granularity: str, inp: SectorInput):
        roles = [r for r in ROLE_LABELS if r in inp.reports]
        if not roles:
            raise PromptInputError("sector prompt needs at least one analyst report")
        engine = [_ROLE_WORDS[r] for r in ("technical", "quantitative") if r in roles]
        steering = [_ROLE_WORDS[r] for r in ("qualitative", "news") if r in roles]
        drivers = ""
        if engine:
            drivers += f"- Treat the {_join_words(engine)} reports as the engine (price and value).\n"
        if steering:
            drivers += f"- Treat the {_join_words(steering)} reports as the steering (hazards ahead).\n"
        system = self._fill("sector_system", analysts=_join_words([_ROLE_WORDS[r] for r in roles]) + " analysts",
                            drivers=drivers)

        pack, avg = inp.target, inp.average
        if pack.kind != granularity or avg.kind != granularity:
            raise PromptInputError(f"{granularity} sector prompt got {pack.kind}/{avg.kind} context")
        lines = []
        if granularity == "fine":
            title = "target vs. sector average, financial ratios"
            for group, items in FINE_LABELS:
                for k, label in items:
                    lines.append(f"[{group}] {label}: target {fmt_num(pack.values[k])} (diff: {fmt_num(pack.changes[k])})"
                                 f" | sector avg {fmt_num(avg.values[k])} (n={avg.counts[k]})")
        else:
            title = "target vs. sector average, rate of change of raw items"
            for group, items in COARSE_LABELS:
                for k, label in items:
                    lines.append(f"[{group}] {label}: target RoC {_pct(pack.changes[k])}"
                                 f" | sector avg RoC {_pct(avg.changes[k])} (n={avg.counts[k]})")
        user = self._fill(
            "sector_user", ticker=inp.ticker, sector=inp.sector, asof=inp.asof.isoformat(),
            reports="\n".join(self._report_line(r, inp.reports[r]) for r in roles),
            context_title=title, context="\n".join(lines), thesis_words=self.lengths["thesis_words"],
        )
        return system, user

    def macro(self, inp: MacroInput):
        system = self._fill("macro_system", summary_chars=self.lengths["summary_chars"])
        ind = inp.snapshot.indicators if inp.snapshot is not None else {}
        lines = []
        for group, items in MACRO_LABELS:
            cells = []
            for k, label in items:
                level, roc = ind.get(k, (None, None))
                cells.append(f"{label}: {fmt_num(level)} (RoC: {_pct(roc)})")
            lines.append(f"[{group}] " + " | ".join(cells))
        snap_month = inp.snapshot.as_of if inp.snapshot is not None else "NaN"
        lines.insert(0, f"Latest snapshot month: {snap_month}")
        user = self._fill("macro_user", month=inp.month, asof=inp.asof.isoformat(), data="\n".join(lines))
        return system, user

    def pm(self, inp: PMInput):
        with_macro = inp.macro_report is not None
        if with_macro:
            views = "the top-down macro assessment with the bottom-up sector and stock analysis"
            logic = ("- Balance the market context against stock specifics.\n"
                     "- If the macro view is risk-off, discount scores conservatively unless the stock is clearly defensive.\n"
                     "- Use the macro context to settle conflicts between price-based and fundamental evidence "
                     "(e.g. high inflation favours pricing power over momentum).\n")
            inputs = (f"[1. Macro environment report]\n{canonical_json(inp.macro_report.payload())}\n"
                      f"[2. Sector specialist report]\n{canonical_json(inp.sector_report.payload())}\n")
            points = ("   - Explain how the macro backdrop affects this specific stock.\n"
                      "   - Summarise the key reasons and the 30-day risk/reward balance.\n")
        else:
            views = "the bottom-up sector and stock analysis"
            logic = "- Weigh the sector specialist's conviction against stock-specific risks.\n"
            inputs = f"[1. Sector specialist report]\n{canonical_json(inp.sector_report.payload())}\n"
            points = "   - Summarise the key reasons and the 30-day risk/reward balance.\n"
        system = self._fill("pm_system", views=views, logic=logic)
        user = self._fill("pm_user", ticker=inp.ticker, asof=inp.asof.isoformat(), inputs=inputs,
                          rationale_chars=self.lengths["rationale_chars"], rationale_points=points)
        return system, user

    def render(self, role: str, granularity: str | None, inputs):
        expected = {
            "technical": TechnicalInput, "quantitative": QuantInput, "qualitative": QualitativeInput,
            "news": NewsInput, "sector": SectorInput, "macro": MacroInput, "pm": PMInput,
        }
        if role not in expected:
            raise PromptInputError(f"unknown role {role!r}")
        if not isinstance(inputs, expected[role]):
            raise PromptInputError(f"{role} prompt needs {expected[role].__name__}, got {type(inputs).__name__}")
        if role in ("technical", "quantitative", "sector"):
            if granularity not in GRANULARITIES:
                raise PromptInputError(f"{role} prompt needs granularity fine|coarse, got {granularity!r}")
            return getattr(self, role)(granularity, inputs)
        return getattr(self, role)(inputs)


_default = PromptRenderer()


def render_prompt(role: str, granularity: str | None, inputs, renderer: PromptRenderer | None = None):
    """(system_prompt, user_prompt) for ``role``; deterministic in its inputs."""
    return (renderer or _default).render(role, granularity, inputs)
