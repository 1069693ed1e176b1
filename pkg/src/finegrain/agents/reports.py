"""Agent output schema, JSON extraction and bound validation."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

ROLES = ("technical", "quantitative", "qualitative", "news", "sector", "macro", "pm")
LEVEL1_ROLES = ("technical", "quantitative", "qualitative", "news")
MACRO_DIMENSIONS = ("market_trend", "risk_environment", "economic_growth", "interest_rates", "inflation")


@dataclass(frozen=True)
class RoleSpec:
    score_keys: tuple
    text_key: str
    low: int
    high: int
    nested: bool = False  # macro: {"metrics": {dim: {"label", "score"}}}

    @property
    def neutral(self) -> int:
        return (self.low + self.high) // 2


ROLE_SPECS = {
    "technical": RoleSpec(("score",), "reason", 0, 100),
    "quantitative": RoleSpec(("score",), "reason", 0, 100),
    "sector": RoleSpec(("score",), "investment_thesis", 0, 100),
    "pm": RoleSpec(("final_score",), "reason", 0, 100),
    "qualitative": RoleSpec(("business_momentum", "risk_severity", "management_trust"), "insight", 1, 5),
    "news": RoleSpec(("return_outlook", "risk_outlook"), "reason", 1, 5),
    "macro": RoleSpec(MACRO_DIMENSIONS, "summary", 0, 100, nested=True),
}


class ReportParseError(ValueError):
    """Model output could not be turned into a valid report."""


@dataclass(frozen=True)
class AgentReport:
    role: str
    scores: dict
    reason: str
    raw: str = ""
    ticker: str | None = None
    month: str | None = None
    granularity: str | None = None
    labels: dict = field(default_factory=dict)  # macro dimension labels
    fallback: bool = False

    @property
    def score(self):
        """The headline 0-100 score, or None for roles scored on several axes."""
        keys = ROLE_SPECS[self.role].score_keys
        return self.scores[keys[0]] if len(keys) == 1 else None

    def payload(self) -> dict:
        """The report in the role's own output schema."""
        spec = ROLE_SPECS[self.role]
        if spec.nested:
            metrics = {k: {"label": self.labels.get(k, ""), "score": self.scores[k]} for k in spec.score_keys}
            return {"metrics": metrics, spec.text_key: self.reason}
        out = {k: self.scores[k] for k in spec.score_keys}
        out[spec.text_key] = self.reason
        return out

    def to_dict(self) -> dict:
        return {
            "role": self.role, "ticker": self.ticker, "month": self.month, "granularity": self.granularity,
            "scores": dict(self.scores), "labels": dict(self.labels), "reason": self.reason,
            "raw": self.raw, "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentReport":
        report = cls(role=d["role"], scores=dict(d["scores"]), reason=d["reason"], raw=d.get("raw", ""),
                     ticker=d.get("ticker"), month=d.get("month"), granularity=d.get("granularity"),
                     labels=dict(d.get("labels") or {}), fallback=bool(d.get("fallback", False)))
        check_bounds(report)
        return report


def extract_json_object(raw: str) -> dict:
    """First decodable JSON object in ``raw``, tolerating surrounding prose or code fences."""
    dec = json.JSONDecoder()
    i = raw.find("{")
    while i != -1:
        try:
            obj, _ = dec.raw_decode(raw, i)
        except json.JSONDecodeError:
            pass
        else:
            if isinstance(obj, dict):
                return obj
        i = raw.find("{", i + 1)
    raise ReportParseError("no JSON object found")


def _as_int(value, key: str, spec: RoleSpec) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ReportParseError(f"{key}: expected a number, got {value!r}")
    if value != value or float(value) != int(value):
        raise ReportParseError(f"{key}: expected an integer, got {value!r}")
    v = int(value)
    if not spec.low <= v <= spec.high:
        raise ReportParseError(f"{key}={v} outside [{spec.low}, {spec.high}]")
    return v


def check_bounds(report: AgentReport) -> None:
    spec = ROLE_SPECS[report.role]
    if set(report.scores) != set(spec.score_keys):
        raise ReportParseError(f"{report.role}: score keys {sorted(report.scores)}")
    for k in spec.score_keys:
        _as_int(report.scores[k], k, spec)
    if not report.reason.strip():
        raise ReportParseError(f"{report.role}: empty {spec.text_key}")


def parse_report(role: str, raw: str, *, ticker=None, month=None, granularity=None) -> AgentReport:
    """Validate model output against ``role``'s schema; raises ReportParseError on any defect."""
    if role not in ROLE_SPECS:
        raise ValueError(f"unknown role {role!r}")
    spec = ROLE_SPECS[role]
    obj = extract_json_object(raw)
    scores, labels = {}, {}
    if spec.nested:
        metrics = obj.get("metrics")
        if not isinstance(metrics, dict):
            raise ReportParseError("macro: missing 'metrics' object")
        for k in spec.score_keys:
            entry = metrics.get(k)
            if not isinstance(entry, dict) or "score" not in entry:
                raise ReportParseError(f"macro: missing metric {k!r}")
            scores[k] = _as_int(entry["score"], k, spec)
            labels[k] = str(entry.get("label", ""))
    else:
        for k in spec.score_keys:
            if k not in obj:
                raise ReportParseError(f"{role}: missing key {k!r}")
            scores[k] = _as_int(obj[k], k, spec)
    text = obj.get(spec.text_key)
    if not isinstance(text, str) or not text.strip():
        raise ReportParseError(f"{role}: missing or empty {spec.text_key!r}")
    return AgentReport(role, scores, text, raw, ticker, month, granularity, labels)


def fallback_report(role: str, raw: str = "", *, ticker=None, month=None, granularity=None,
                    error: Exception | None = None) -> AgentReport:
    """Neutral report used when the model output stays unusable after the retry."""
    spec = ROLE_SPECS[role]
    log.warning("fallback %s report for %s %s (%s): %s", role, ticker or "ALL", month, granularity, error)
    scores = {k: spec.neutral for k in spec.score_keys}
    labels = {k: "fallback" for k in spec.score_keys} if spec.nested else {}
    return AgentReport(role, scores, "fallback", raw, ticker, month, granularity, labels, fallback=True)
