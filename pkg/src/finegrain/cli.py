"""Command line: validate | backtest | compare | optimize | analyze-text.

Every command writes under ``--out`` and finishes with ``manifest.json``, a
sorted map of relative path -> sha256, so identical inputs give identical manifests.
Exit codes: 0 success, 1 validation failure, 2 configuration error, 3 backend failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .agents import AblationMask, AgentPipeline, TranscriptRecord, TranscriptStore, load_backend, median_scores
from .agents.prompts import PromptRenderer
from .analysis import (OfflineEmbedder, TokenCorpus, delta_sharpe_tables, log_odds, log_odds_csv,
                       propagation_report, sharpe_groups, top_k)
from .marketdata import CalendarGapError, DataError, load_repository, rebalance_schedule, slice_asof
from .optimizer import (StrategyPanel, blend_curve_csv, blend_sweep, composite_returns, expanding_covariances,
                        blend_summary_json)
from .portfolio import BacktestResult, holding_periods, run_backtest
from .util import month_of

log = logging.getLogger("finegrain")

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_BACKEND = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    data_root: str
    start_month: str
    end_month: str
    universe: str | None = None
    granularities: tuple = ("fine", "coarse")
    masks: tuple = ("none",)
    sizes: tuple = (10, 20, 30, 40, 50)
    trials: int = 50
    backend: dict = field(default_factory=lambda: {"mode": "scripted"})
    cost_bps: float = 10.0
    seed: int = 0
    language: str = "Japanese"
    max_workers: int = 1

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        try:
            data_root = d["data_root"]
            start, end = d["start_month"], d["end_month"]
        except KeyError as e:
            raise ConfigError(f"missing config key {e.args[0]!r}") from None
        if base is not None and not Path(data_root).is_absolute():
            data_root = str(base / data_root)
        gran = d.get("granularity", ["fine", "coarse"])
        gran = (gran,) if isinstance(gran, str) else tuple(gran)
        masks = d.get("masks", ["none"])
        if masks == "all":
            masks = [m.name for m in AblationMask.leave_one_out()]
        masks = (masks,) if isinstance(masks, str) else tuple(masks)
        cfg = cls(
            data_root=str(data_root), start_month=str(start), end_month=str(end), universe=d.get("universe"),
            granularities=gran, masks=masks, sizes=tuple(int(n) for n in d.get("sizes", cls.sizes)),
            trials=int(d.get("trials", 50)), backend=dict(d.get("backend", {"mode": "scripted"})),
            cost_bps=float(d.get("cost_bps", 10.0)), seed=int(d.get("seed", 0)),
            language=str(d.get("language", "Japanese")), max_workers=int(d.get("max_workers", 1)),
        )
        cfg.check()
        return cfg

    def check(self) -> None:
        if any(g not in ("fine", "coarse") for g in self.granularities) or not self.granularities:
            raise ConfigError(f"granularity must be fine and/or coarse, got {self.granularities}")
        if not self.sizes or any(n <= 0 or n % 2 for n in self.sizes):
            raise ConfigError(f"portfolio sizes must be positive even integers, got {self.sizes}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.cost_bps < 0:
            raise ConfigError("cost_bps must be >= 0")
        for m in self.masks:
            try:
                AblationMask.parse(m)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        if self.start_month > self.end_month:
            raise ConfigError(f"start_month {self.start_month} after end_month {self.end_month}")


def read_config(path) -> RunConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    return RunConfig.from_dict(raw, base=p.parent)


# --- output helpers -------------------------------------------------------------

def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=True) + "\n"


def write_manifest(out: Path) -> dict:
    files = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            files[p.relative_to(out).as_posix()] = hashlib.sha256(p.read_bytes()).hexdigest()
    manifest = {"files": files}
    _write(out / "manifest.json", _dumps(manifest))
    return manifest


def _load_repo(cfg: RunConfig):
    repo = load_repository(cfg.data_root, cfg.universe)
    months = {month_of(d) for d in repo.calendar.as_dates()}
    if cfg.start_month not in months or cfg.end_month not in months:
        raise ConfigError(f"window {cfg.start_month}..{cfg.end_month} outside the data coverage")
    return repo


# --- commands --------------------------------------------------------------------

def cmd_validate(cfg: RunConfig, out: Path | None = None) -> int:
    try:
        repo = load_repository(cfg.data_root, cfg.universe)
    except DataError as e:
        print(f"ERROR {e}")
        return EXIT_INVALID
    for r in repo.rejected:
        print(f"REJECTED {r}")
    status = "clean" if not repo.rejected else f"{len(repo.rejected)} rejected rows"
    print(f"{len(repo.universe)} tickers, {len(repo.calendar)} trading days: {status}")
    if out is not None:
        report = {"tickers": repo.tickers, "trading_days": len(repo.calendar),
                  "rejected": [{"path": r.path, "line": r.line, "reason": r.reason} for r in repo.rejected]}
        _write(out / "validation.json", _dumps(report))
        write_manifest(out)
    return EXIT_OK if not repo.rejected else EXIT_INVALID


def cmd_backtest(cfg: RunConfig, out: Path) -> int:
    """Scores every (granularity, mask, trial), then backtests each portfolio size.

    Per trial one result file per size; ``median.json`` uses the per-ticker
    median score across trials.
    """
    repo = _load_repo(cfg)
    schedule = rebalance_schedule(repo.calendar, cfg.start_month, cfg.end_month)
    holding_periods(repo.calendar, schedule)  # fail early if the last period cannot be closed
    renderer = PromptRenderer(language=cfg.language)
    failures = 0
    for gran in cfg.granularities:
        for mask_name in cfg.masks:
            mask = AblationMask.parse(mask_name)
            store = TranscriptStore(out / "transcripts" / gran / mask.name)
            trial_scores = []
            for trial in range(cfg.trials):
                backend = load_backend({"seed": cfg.seed, **cfg.backend})
                pipe = AgentPipeline(backend, store, renderer, trial=trial, max_workers=cfg.max_workers)
                scores = {}
                for dec, _ in schedule:
                    m = month_of(dec)
                    scores[m] = pipe.run_month(slice_asof(repo, dec), m, gran, mask)
                failures += pipe.backend_failures
                trial_scores.append(scores)
                _write(out / "scores" / gran / mask.name / f"trial_{trial:03d}.json", _dumps(scores))
            consensus = {m: median_scores([t[m] for t in trial_scores]) for m in trial_scores[0]}
            _write(out / "scores" / gran / mask.name / "median.json", _dumps(consensus))
            for n in cfg.sizes:
                base = {"granularity": gran, "mask": mask.name, "trials": cfg.trials}
                for trial, scores in enumerate(trial_scores):
                    res = run_backtest(repo, schedule, lambda v, m, s=scores: s[m], n, cfg.cost_bps,
                                       {**base, "trial": trial})
                    _save_result(out / "results" / gran / mask.name / f"N{n}" / f"trial_{trial:03d}", res)
                res = run_backtest(repo, schedule, lambda v, m: consensus[m], n, cfg.cost_bps,
                                   {**base, "trial": "median"})
                _save_result(out / "results" / gran / mask.name / f"N{n}" / "median", res)
    write_manifest(out)
    if failures:
        print(f"{failures} backend failures; fallback reports were used", file=sys.stderr)
        return EXIT_BACKEND
    return EXIT_OK


def _save_result(stem: Path, res: BacktestResult) -> None:
    _write(stem.with_suffix(".json"), res.to_json())
    _write(stem.with_suffix(".csv"), res.to_csv())


def _trial_results(root: Path) -> list[BacktestResult]:
    out = []
    for p in sorted(root.rglob("trial_*.json")):
        d = json.loads(p.read_text(encoding="utf-8"))
        if "gross" in d and "config" in d:
            out.append(BacktestResult.from_dict(d))
    return out


def cmd_compare(fine_dir: Path, coarse_dir: Path, out: Path) -> int:
    results = _trial_results(fine_dir) + _trial_results(coarse_dir)
    if not results:
        raise ConfigError(f"no trial results under {fine_dir} or {coarse_dir}")
    tables = delta_sharpe_tables(sharpe_groups(results))
    _write(out / "delta_sr_tables.json", tables.to_json())
    _write(out / "delta_sr_tables.txt", tables.render())
    print(tables.render(), end="")
    write_manifest(out)
    return EXIT_OK


def read_index_csv(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["month"]: float(row["return"]) for row in csv.DictReader(fh)}


def cmd_optimize(cfg: RunConfig, result_files: list[Path], index_path: Path, out: Path,
                 min_months: int = 6) -> int:
    """ERC composite over the given strategy results, then the index blend sweep."""
    repo = _load_repo(cfg)
    strategies = {}
    for p in result_files:
        res = BacktestResult.from_dict(json.loads(Path(p).read_text(encoding="utf-8")))
        label = "/".join(str(res.config.get(k)) for k in ("granularity", "mask", "N"))
        if label in strategies:
            label = f"{label}#{len(strategies)}"
        strategies[label] = res
    if len(strategies) < 2:
        raise ConfigError("optimize needs at least two strategy result files")
    months = sorted(set.intersection(*(set(r.months) for r in strategies.values())))
    schedule = [(d, e) for d, e in rebalance_schedule(repo.calendar, months[0], months[-1]) if month_of(d) in months]
    periods = {month_of(d): (e, n) for d, e, n in holding_periods(repo.calendar, schedule)}
    tickers = repo.tickers
    panels, stock_rets = {}, {}
    for m in months:
        books = {lab: next(w.weights for w in r.weights if w.month == m) for lab, r in strategies.items()}
        panels[m] = StrategyPanel.from_books(books, tickers)
        e, n = periods[m]
        stock_rets[m] = {t: repo.prices[t].open_on(n) / repo.prices[t].open_on(e) - 1.0 for t in tickers}
    covs = expanding_covariances(repo.prices, tickers, repo.calendar,
                                 {month_of(d): d for d, _ in schedule}, min_months)
    comp = composite_returns(panels, covs, stock_rets, cfg.cost_bps)
    index = read_index_csv(index_path)
    missing = [m for m in months if m not in index]
    if missing:
        raise ConfigError(f"index returns missing for {missing}")
    points = blend_sweep([index[m] for m in months], comp.returns, comp.turnover, cfg.cost_bps)
    _write(out / "blend_curve.csv", blend_curve_csv(points))
    _write(out / "table4.json", blend_summary_json(points))
    _write(out / "composite.json", _dumps({
        "months": comp.months, "gross": comp.returns, "net": comp.net, "turnover": comp.turnover,
        "strategies": list(comp.labels), "erc_weights": [s.w.tolist() for s in comp.erc],
    }))
    write_manifest(out)
    return EXIT_OK


def _record_groups(dirs) -> list[list[TranscriptRecord]]:
    """One record list per transcript store found under ``dirs``."""
    groups = []
    for d in dirs:
        roots = sorted({p.parent for p in Path(d).rglob("*.json") if p.name.count("__") == 4})
        groups += [TranscriptStore(root).records() for root in roots]
    return groups


def cmd_analyze_text(dirs, out: Path, seed: int = 0, prior_scale: float = 0.01, k: int = 10,
                     embedder=None) -> int:
    groups = _record_groups(dirs)
    recs = [r for g in groups for r in g]
    if not recs:
        raise ConfigError(f"no transcripts found under {list(map(str, dirs))}")
    texts = {"fine": [], "coarse": []}
    for r in recs:
        if not r.report.fallback and r.granularity in texts:
            texts[r.granularity].append(r.report.reason)
    if texts["fine"] and texts["coarse"]:
        res = log_odds(TokenCorpus.from_texts("fine", texts["fine"]),
                       TokenCorpus.from_texts("coarse", texts["coarse"]), prior_scale)
        _write(out / "logodds_fine_vs_coarse.csv", log_odds_csv(res))
        top_i, top_j = top_k(res, k)
        _write(out / "logodds_top.json", _dumps({"fine": top_i, "coarse": top_j}))
    report = propagation_report(groups, embedder or OfflineEmbedder(seed=seed))
    _write(out / "similarity_report.json", report.to_json())
    write_manifest(out)
    return EXIT_OK


# --- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="finegrain", description="Multi-agent backtesting toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load fixtures and report invariant violations")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = sub.add_parser("backtest", help="run the agent pipeline and backtest every configured variant")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, help="override the configured trial count")

    p = sub.add_parser("compare", help="fine vs coarse and ablation Sharpe tables")
    p.add_argument("--fine", required=True, help="directory holding fine-granularity trial results")
    p.add_argument("--coarse", required=True, help="directory holding coarse-granularity trial results")
    p.add_argument("--out", required=True)

    p = sub.add_parser("optimize", help="ERC composite of strategy results and index blend sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--results", nargs="+", required=True, help="strategy result JSON files")
    p.add_argument("--index", required=True, help="CSV with month,return columns")
    p.add_argument("--out", required=True)

    p = sub.add_parser("analyze-text", help="log-odds and similarity reports over transcripts")
    p.add_argument("dirs", nargs="+", help="transcript directories")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            return cmd_validate(read_config(args.config), Path(args.out) if args.out else None)
        if args.command == "backtest":
            cfg = read_config(args.config)
            if args.trials is not None:
                cfg.trials = args.trials
                cfg.check()
            return cmd_backtest(cfg, Path(args.out))
        if args.command == "compare":
            return cmd_compare(Path(args.fine), Path(args.coarse), Path(args.out))
        if args.command == "optimize":
            return cmd_optimize(read_config(args.config), [Path(p) for p in args.results], Path(args.index),
                                Path(args.out))
        if args.command == "analyze-text":
            return cmd_analyze_text(args.dirs, Path(args.out), seed=args.seed)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CalendarGapError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except FileExistsError as e:
        print(f"output already present (transcripts are append-only): {e}", file=sys.stderr)
        return EXIT_CONFIG
    ap.error(f"unknown command {args.command}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
