"""ΔSR tables: fine minus coarse per ablation mask, and ablation minus baseline per granularity."""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass

from ..portfolio import sharpe
from .stats import mann_whitney_u

MASK_ORDER = ("none", "no_technical", "no_quantitative", "no_qualitative", "no_news", "no_macro")
MASK_LABELS = {
    "none": "All agents", "no_technical": "w/o Technical", "no_quantitative": "w/o Quant.",
    "no_qualitative": "w/o Qual.", "no_news": "w/o News", "no_macro": "w/o Macro",
}


def fmt_value(v: float, signed: bool = True) -> str:
    """Two decimals with one trailing zero dropped: 0.2 -> "+0.2", 1.0 -> "+1.0", -0.12 -> "-0.12"."""
    v = round(v, 2) + 0.0
    s = f"{v:+.2f}" if signed else f"{v:.2f}"
    return s[:-1] if s.endswith("0") else s


def sharpe_groups(results) -> dict:
    """(granularity, mask, N) -> monthly gross Sharpe per trial, ordered by trial id."""
    acc: dict = {}
    for r in results:
        c = r.config
        key = (c["granularity"], c["mask"], int(c["N"]))
        acc.setdefault(key, []).append((int(c.get("trial", 0)), sharpe(r.gross)))
    return {k: [s for _, s in sorted(v)] for k, v in sorted(acc.items())}


def _cell(a, b) -> dict:
    delta = statistics.median(a) - statistics.median(b)
    if min(len(a), len(b)) < 2:
        p, star = float("nan"), ""
    else:
        test = mann_whitney_u(a, b)
        p, star = test.p, test.stars
    text = fmt_value(delta) + ("" if star in ("", "ns") else star)
    return {"delta": delta, "p": p, "stars": star, "n": [len(a), len(b)], "text": text}


def _order(masks):
    known = [m for m in MASK_ORDER if m in masks]
    return known + sorted(set(masks) - set(known))


@dataclass(frozen=True)
class DeltaSharpeTables:
    granularity_gap: dict  # mask -> {N: cell}
    ablation: dict  # granularity -> {"baseline": {N: median}, mask -> {N: cell}}
    sizes: tuple

    def to_dict(self) -> dict:
        def clean(x):
            if isinstance(x, float) and x != x:
                return None
            if isinstance(x, dict):
                return {str(k): clean(v) for k, v in x.items()}
            if isinstance(x, list):
                return [clean(v) for v in x]
            return x

        return clean({"sizes": list(self.sizes), "granularity_gap": self.granularity_gap,
                      "ablation": self.ablation})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def render(self) -> str:
        """Plain-text layout with one row per mask and one column per portfolio size."""
        head = ["Portfolio size".ljust(22)] + [str(n).rjust(11) for n in self.sizes]
        lines = ["Fine minus coarse median Sharpe", "".join(head)]
        for mask, row in self.granularity_gap.items():
            lines.append(MASK_LABELS.get(mask, mask).ljust(22)
                         + "".join(row[n]["text"].rjust(11) if n in row else "".rjust(11) for n in self.sizes))
        for gran, block in self.ablation.items():
            lines += ["", f"Ablation minus baseline ({gran})", "".join(head)]
            base = block["baseline"]
            lines.append("All agents (Baseline)".ljust(22)
                         + "".join(fmt_value(base[n], signed=False).rjust(11) if n in base else "".rjust(11)
                                   for n in self.sizes))
            for mask, row in block.items():
                if mask == "baseline":
                    continue
                lines.append(MASK_LABELS.get(mask, mask).ljust(22)
                             + "".join(row[n]["text"].rjust(11) if n in row else "".rjust(11) for n in self.sizes))
        return "\n".join(lines) + "\n"


def delta_sharpe_tables(groups: dict) -> DeltaSharpeTables:
    """Build both tables from (granularity, mask, N) -> list of per-trial Sharpe ratios."""
    sizes = tuple(sorted({k[2] for k in groups}))
    masks = _order({k[1] for k in groups})
    granularity_gap = {}
    for mask in masks:
        row = {}
        for n in sizes:
            fine, coarse = groups.get(("fine", mask, n)), groups.get(("coarse", mask, n))
            if fine and coarse:
                row[n] = _cell(fine, coarse)
        if row:
            granularity_gap[mask] = row
    ablation = {}
    for gran in ("fine", "coarse"):
        base = {n: groups[(gran, "none", n)] for n in sizes if groups.get((gran, "none", n))}
        if not base:
            continue
        block = {"baseline": {n: statistics.median(v) for n, v in base.items()}}
        for mask in masks:
            if mask == "none":
                continue
            row = {n: _cell(groups[(gran, mask, n)], base[n]) for n in sizes
                   if n in base and groups.get((gran, mask, n))}
            if row:
                block[mask] = row
        ablation[gran] = block
    return DeltaSharpeTables(granularity_gap, ablation, sizes)
