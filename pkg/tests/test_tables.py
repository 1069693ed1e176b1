import json
import math

import pytest

from finegrain.analysis.stats import mann_whitney_u
from finegrain.analysis.tables import delta_sharpe_tables, fmt_value, sharpe_groups
from finegrain.portfolio import BacktestResult, sharpe


@pytest.mark.parametrize("v,signed,text", [
    (0.2, True, "+0.2"), (1.0, True, "+1.0"), (-0.12, True, "-0.12"), (0.0, True, "+0.0"),
    (-0.001, True, "+0.0"), (0.456, True, "+0.46"), (0.35, False, "0.35"), (2.0, False, "2.0"),
])
def test_fmt_value(v, signed, text):
    assert fmt_value(v, signed) == text


def result(gran, mask, n, trial, gross):
    return BacktestResult(["m1", "m2", "m3"], gross, gross, [0, 0, 0],
                          config={"granularity": gran, "mask": mask, "N": n, "trial": trial})


def test_sharpe_groups_orders_by_trial():
    rs = [result("fine", "none", 2, 1, [0.1, 0.0, 0.05]), result("fine", "none", 2, 0, [0.02, 0.01, 0.0])]
    g = sharpe_groups(rs)
    assert g == {("fine", "none", 2): [sharpe([0.02, 0.01, 0.0]), sharpe([0.1, 0.0, 0.05])]}


def groups_fixture():
    fine = [0.305, 0.355, 0.405, 0.455, 0.505, 0.555, 0.605, 0.655]
    coarse = [0.10, 0.12, 0.14, 0.16, 0.18, 0.20, 0.22, 0.24]
    return {
        ("fine", "none", 2): fine, ("coarse", "none", 2): coarse,
        ("fine", "no_news", 2): [x - 0.1 for x in fine], ("coarse", "no_news", 2): coarse,
        ("fine", "none", 4): [0.2], ("coarse", "none", 4): [0.1],
    }


def test_delta_tables_values_and_stars():
    t = delta_sharpe_tables(groups_fixture())
    assert t.sizes == (2, 4)
    cell = t.granularity_gap["none"][2]
    assert cell["delta"] == pytest.approx(0.48 - 0.17)
    assert cell["p"] == mann_whitney_u(groups_fixture()[("fine", "none", 2)],
                                       groups_fixture()[("coarse", "none", 2)]).p
    assert cell["text"] == "+0.31***"  # exact p = 2/12870
    single = t.granularity_gap["none"][4]
    assert math.isnan(single["p"]) and single["stars"] == "" and single["text"] == "+0.1"
    abl = t.ablation["fine"]
    assert abl["baseline"][2] == pytest.approx(0.48)
    assert abl["no_news"][2]["delta"] == pytest.approx(-0.1)
    assert list(t.granularity_gap) == ["none", "no_news"]


def test_delta_tables_serialise_and_render():
    t = delta_sharpe_tables(groups_fixture())
    d = json.loads(t.to_json())
    assert d["granularity_gap"]["none"]["4"]["p"] is None
    text = t.render()
    assert "All agents" in text and "w/o News" in text and "+0.31***" in text
