import json
import subprocess
import sys

import pytest

from finegrain.cli import main
from finegrain.synthetic import index_returns, write_fixture, write_index_csv


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    write_fixture(root / "data")
    return root


def config(root, name="config.json", **over):
    cfg = {"data_root": "data", "start_month": "2023-04", "end_month": "2023-07", "sizes": [2, 4], "trials": 1,
           "granularity": ["fine", "coarse"], "masks": ["none"], "backend": {"mode": "scripted"}, "seed": 1}
    cfg.update(over)
    path = root / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_validate_clean_and_dirty(workspace, tmp_path, capsys):
    assert main(["validate", "--config", config(workspace), "--out", str(tmp_path / "v")]) == 0
    assert json.loads((tmp_path / "v" / "validation.json").read_text())["rejected"] == []
    dirty = tmp_path / "dirty"
    write_fixture(dirty / "data")
    news = dirty / "data" / "news.jsonl"
    news.write_text(news.read_text() + '{"ticker_matches": ["1001"], "date": "2023-01-05", "headline": ""}\n')
    assert main(["validate", "--config", config(dirty)]) == 1
    assert "REJECTED" in capsys.readouterr().out


def test_validate_fatal_and_config_errors(tmp_path, capsys):
    (tmp_path / "data").mkdir()
    (tmp_path / "data" / "universe.json").write_text("[]")
    assert main(["validate", "--config", config(tmp_path)]) == 1
    assert main(["validate", "--config", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["validate", "--config", str(tmp_path / "bad.json")]) == 2


def test_backtest_config_errors(workspace, tmp_path):
    assert main(["backtest", "--config", config(workspace, "c1.json", sizes=[3]), "--out", str(tmp_path / "a")]) == 2
    assert main(["backtest", "--config", config(workspace, "c2.json", masks=["no_sector"]),
                 "--out", str(tmp_path / "b")]) == 2
    assert main(["backtest", "--config", config(workspace, "c3.json", start_month="1999-01"),
                 "--out", str(tmp_path / "c")]) == 2


def test_backtest_corrupt_data_exits_1(tmp_path):
    write_fixture(tmp_path / "data")
    p = sorted((tmp_path / "data" / "prices").glob("*.csv"))[0]
    lines = p.read_text().splitlines()
    lines[2] = "garbage"
    p.write_text("\n".join(lines) + "\n")
    assert main(["backtest", "--config", config(tmp_path), "--out", str(tmp_path / "o")]) == 1


@pytest.fixture(scope="module")
def run_dir(workspace):
    out = workspace / "run1"
    assert main(["backtest", "--config", config(workspace, masks="all"), "--out", str(out)]) == 0
    return out


def test_backtest_layout_and_determinism(workspace, run_dir):
    manifest = json.loads((run_dir / "manifest.json").read_text())["files"]
    ablations = [m for m in ("no_technical", "no_quantitative", "no_qualitative", "no_news", "no_macro")
                 if f"results/fine/{m}/N2/median.json" in manifest]
    assert len(ablations) == 5
    assert "results/coarse/none/N4/trial_000.csv" in manifest
    assert any(k.startswith("transcripts/fine/no_news/") for k in manifest)
    again = workspace / "run2"
    assert main(["backtest", "--config", config(workspace, masks="all"), "--out", str(again)]) == 0
    assert (again / "manifest.json").read_bytes() == (run_dir / "manifest.json").read_bytes()


def test_rerun_into_same_dir_is_refused(workspace, run_dir):
    assert main(["backtest", "--config", config(workspace, masks="all"), "--out", str(run_dir)]) == 2


def test_two_trials_match_one(workspace, tmp_path):
    one, two = tmp_path / "one", tmp_path / "two"
    assert main(["backtest", "--config", config(workspace), "--out", str(one)]) == 0
    assert main(["backtest", "--config", config(workspace), "--trials", "2", "--out", str(two)]) == 0
    a = json.loads((one / "results/fine/none/N2/median.json").read_text())
    b = json.loads((two / "results/fine/none/N2/median.json").read_text())
    assert a["gross"] == b["gross"] and a["weights"] == b["weights"]
    assert b["config"]["trials"] == 2
    t0 = json.loads((two / "results/fine/none/N2/trial_000.json").read_text())
    t1 = json.loads((two / "results/fine/none/N2/trial_001.json").read_text())
    assert t0["gross"] == t1["gross"] == b["gross"]


def test_backend_failure_exits_3_with_outputs(workspace, tmp_path):
    cfg = config(workspace, "replay.json", granularity="fine", sizes=[2],
                 backend={"mode": "replay", "dir": str(tmp_path / "nothing")})
    out = tmp_path / "o"
    assert main(["backtest", "--config", cfg, "--out", str(out)]) == 3
    res = json.loads((out / "results/fine/none/N2/median.json").read_text())
    assert len(res["months"]) == 4
    assert (out / "manifest.json").exists()


def test_compare_optimize_analyze(workspace, run_dir, tmp_path):
    assert main(["compare", "--fine", str(run_dir / "results" / "fine"), "--coarse",
                 str(run_dir / "results" / "coarse"), "--out", str(tmp_path / "cmp")]) == 0
    tables = json.loads((tmp_path / "cmp" / "delta_sr_tables.json").read_text())
    assert set(tables["granularity_gap"]) == {"none", "no_technical", "no_quantitative", "no_qualitative", "no_news",
                                              "no_macro"}
    from finegrain.marketdata import load_repository, rebalance_schedule
    repo = load_repository(workspace / "data")
    write_index_csv(tmp_path / "index.csv", index_returns(repo, rebalance_schedule(repo.calendar, "2023-04", "2023-07")))
    results = sorted(str(p) for p in (run_dir / "results").glob("*/none/N*/median.json"))
    assert main(["optimize", "--config", config(workspace), "--results", *results, "--index",
                 str(tmp_path / "index.csv"), "--out", str(tmp_path / "opt")]) == 0
    summary = json.loads((tmp_path / "opt" / "table4.json").read_text())
    assert list(summary["rows"]) == ["Index", "Agent Strategies", "50-50 Combined"]
    assert (tmp_path / "opt" / "blend_curve.csv").read_text().count("\n") == 12
    assert main(["optimize", "--config", config(workspace), "--results", results[0], "--index",
                 str(tmp_path / "index.csv"), "--out", str(tmp_path / "opt2")]) == 2
    assert main(["analyze-text", str(run_dir / "transcripts"), "--out", str(tmp_path / "txt")]) == 0
    sim = json.loads((tmp_path / "txt" / "similarity_report.json").read_text())
    assert set(sim["rows"]) == {"technical", "quantitative", "qualitative", "news"}
    assert (tmp_path / "txt" / "logodds_fine_vs_coarse.csv").exists()
    assert main(["analyze-text", str(tmp_path / "empty"), "--out", str(tmp_path / "t2")]) == 2


def test_module_entry_point(workspace, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "finegrain", "validate", "--config", config(workspace)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "clean" in proc.stdout
