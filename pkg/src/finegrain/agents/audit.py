"""String audits over transcripts: look-ahead leakage and ablation-mask soundness."""

from __future__ import annotations

import datetime as dt
import re

from ..util import fmt_num, month_of, parse_date

_ISO = re.compile(r"\b(\d{4})-(\d{2})-(\d{2})\b")
_MONTH = re.compile(r"\b(\d{4})-(\d{2})\b(?!-)")

# Words that would reveal an excluded role inside sector / PM prompts.
ROLE_PATTERNS = {
    "technical": re.compile(r"technical", re.I),
    "quantitative": re.compile(r"quant", re.I),
    "qualitative": re.compile(r"qualitative", re.I),
    "news": re.compile(r"\bnews\b", re.I),
    "macro": re.compile(r"macro", re.I),
}
DOWNSTREAM = {
    "technical": ("sector", "pm"), "quantitative": ("sector", "pm"), "qualitative": ("sector", "pm"),
    "news": ("sector", "pm"), "macro": ("pm",),
}


def leakage_violations(records, decisions: dict, repo=None) -> list[str]:
    """Problems found in ``records`` given ``decisions`` (month -> decision date).

    Checks that every ISO date and YYYY-MM month in a prompt is no later than the
    decision date, and, when ``repo`` is given, that no later news headline or
    later-published filing text shows up and that the coarse price window
    starts at the decision-date close.
    """
    problems = []
    future_news = {}
    future_texts = {}
    if repo is not None:
        for m, d in decisions.items():
            d = parse_date(d)
            future_news[m] = [(c, n.headline) for c, ns in repo.news.items() for n in ns if n.date > d]
            future_texts[m] = [(c, t) for c, rs in repo.statements.items() for r in rs if r.publish_date > d
                               for t in r.texts.values() if t]
    for rec in records:
        d = parse_date(decisions[rec.month])
        tag = f"{rec.month}/{rec.role}/{rec.ticker}/{rec.granularity}/t{rec.trial}"
        for prompt in rec.prompts():
            for y, mo, day in _ISO.findall(prompt):
                when = dt.date(int(y), int(mo), int(day))
                if when > d:
                    problems.append(f"{tag}: date {when} after decision date {d}")
            for y, mo in _MONTH.findall(prompt):
                if f"{y}-{mo}" > month_of(d):
                    problems.append(f"{tag}: month {y}-{mo} after decision month {month_of(d)}")
            if repo is None:
                continue
            for code, headline in future_news.get(rec.month, ()):
                if code == rec.ticker and headline in prompt:
                    problems.append(f"{tag}: future headline {headline!r}")
            for code, text in future_texts.get(rec.month, ()):
                if code == rec.ticker and text in prompt and not _also_published(repo, code, text, d):
                    problems.append(f"{tag}: text from a filing published after {d}")
        if repo is not None and rec.role == "technical" and rec.granularity == "coarse":
            expected = fmt_num(repo.prices[rec.ticker].close_asof(d))
            m = re.search(r"\[([^\]\n]*)\]\s*$", rec.exchanges[0]["user"])
            first = m.group(1).split(", ")[0] if m else None
            if first != expected:
                problems.append(f"{tag}: first price {first} != decision close {expected}")
    return problems


def _also_published(repo, code, text, d) -> bool:
    # boilerplate repeated in an earlier filing is not a leak
    return any(r.publish_date <= d and text in r.texts.values() for r in repo.statements.get(code, ()))


def mask_violations(records, excluded) -> list[str]:
    """Excluded roles must have no transcripts and no mention in downstream prompts."""
    problems = []
    for rec in records:
        if rec.role in excluded:
            problems.append(f"{rec.month}/{rec.ticker}: transcript for excluded role {rec.role}")
            continue
        for role in excluded:
            if rec.role not in DOWNSTREAM[role]:
                continue
            for prompt in rec.prompts():
                hit = ROLE_PATTERNS[role].search(prompt)
                if hit:
                    problems.append(f"{rec.month}/{rec.role}/{rec.ticker}: mentions excluded {role} ({hit.group(0)!r})")
    return problems
