"""Append-only transcript store: one JSON file per (month, role, ticker, granularity, trial)."""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

from .reports import AgentReport


@dataclass(frozen=True)
class TranscriptRecord:
    month: str
    role: str
    ticker: str | None
    granularity: str
    trial: int
    exchanges: tuple  # ({"system", "user", "output"}, ...) in attempt order
    report: AgentReport

    @property
    def key(self) -> tuple:
        return (self.month, self.role, self.ticker, self.granularity, self.trial)

    def prompts(self) -> list[str]:
        return [ex["system"] + "\n" + ex["user"] for ex in self.exchanges]

    def to_dict(self) -> dict:
        return {
            "month": self.month, "role": self.role, "ticker": self.ticker, "granularity": self.granularity,
            "trial": self.trial, "exchanges": [dict(e) for e in self.exchanges], "report": self.report.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TranscriptRecord":
        return cls(d["month"], d["role"], d["ticker"], d["granularity"], int(d["trial"]),
                   tuple(d["exchanges"]), AgentReport.from_dict(d["report"]))


def record_filename(month, role, ticker, granularity, trial) -> str:
    return f"{month}__{role}__{ticker or 'ALL'}__{granularity}__t{int(trial):03d}.json"


class TranscriptStore:
    """Thread-safe, append-only. Writing an existing key raises ``FileExistsError``.

    ``root=None`` keeps records in memory only.
    """

    def __init__(self, root=None):
        self.root = Path(root) if root is not None else None
        self._lock = threading.Lock()
        self._memory: dict[tuple, TranscriptRecord] = {}
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    def append(self, record: TranscriptRecord) -> None:
        with self._lock:
            if record.key in self._memory:
                raise FileExistsError(f"transcript already recorded: {record.key}")
            if self.root is not None:
                path = self.root / record_filename(*record.key)
                text = json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False, indent=1) + "\n"
                # exclusive create keeps the store append-only across processes too
                with open(path, "x", encoding="utf-8") as fh:
                    fh.write(text)
            self._memory[record.key] = record

    def load(self, month, role, ticker, granularity, trial) -> TranscriptRecord:
        key = (month, role, ticker, granularity, int(trial))
        with self._lock:
            if key in self._memory:
                return self._memory[key]
        if self.root is None:
            raise FileNotFoundError(str(key))
        path = self.root / record_filename(*key)
        rec = TranscriptRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))
        with self._lock:
            self._memory.setdefault(key, rec)
        return rec

    def records(self) -> list[TranscriptRecord]:
        """All records, sorted by key (disk contents included)."""
        if self.root is not None:
            for name in sorted(os.listdir(self.root)):
                if name.endswith(".json"):
                    parts = name[:-5].split("__")
                    if len(parts) == 5:
                        month, role, ticker, gran, trial = parts
                        self.load(month, role, None if ticker == "ALL" else ticker, gran, int(trial[1:]))
        with self._lock:
            recs = list(self._memory.values())
        return sorted(recs, key=lambda r: (r.month, r.role, r.ticker or "", r.granularity, r.trial))

    def __len__(self) -> int:
        return len(self.records())
