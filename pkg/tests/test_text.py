import csv
import io
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finegrain.analysis.text import TokenCorpus, log_odds, log_odds_csv, tokenize, top_k


def test_tokenize():
    assert tokenize("The margin, and GROWTH_rate: 3.5% 円安!") == ["margin", "growth", "rate", "3", "5", "円安"]
    assert tokenize("the of", stopwords=frozenset()) == ["the", "of"]


def test_hand_formula():
    ci = TokenCorpus("i", {"up": 3, "flat": 1})
    cj = TokenCorpus("j", {"down": 2, "flat": 2})
    r = log_odds(ci, cj, prior_scale=0.5)
    a, a0 = 0.5, 1.5  # three vocabulary words
    for w, yi, yj in (("up", 3, 0), ("flat", 1, 2), ("down", 0, 2)):
        d = math.log((yi + a) / (4 + a0 - yi - a)) - math.log((yj + a) / (4 + a0 - yj - a))
        v = 1 / (yi + a) + 1 / (yj + a)
        got = r[w]
        assert got[0] == pytest.approx(d) and got[1] == pytest.approx(v) and got[2] == pytest.approx(d / math.sqrt(v))


counts = st.dictionaries(st.sampled_from(["a", "b", "c", "d", "e", "f"]), st.integers(1, 50), min_size=1)


@settings(max_examples=100, deadline=None)
@given(counts, counts)
def test_antisymmetry(x, y):
    if len(set(x) | set(y)) < 2:
        with pytest.raises(ValueError):
            log_odds(TokenCorpus("i", x), TokenCorpus("j", y))
        return
    ci, cj = TokenCorpus("i", x), TokenCorpus("j", y)
    f, b = log_odds(ci, cj), log_odds(cj, ci)
    assert f.tokens == b.tokens
    for k in range(len(f.tokens)):
        assert f.delta[k] == pytest.approx(-b.delta[k], abs=1e-12)
        assert f.z[k] == pytest.approx(-b.z[k], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=2, max_size=6), st.data())
def test_stronger_prior_shrinks_when_totals_match(xs, data):
    ys = data.draw(st.permutations(xs))
    if sum(1 for c in xs if c) < 2:
        return
    names = [f"w{k}" for k in range(len(xs))]
    ci = TokenCorpus("i", {w: c for w, c in zip(names, xs) if c})
    cj = TokenCorpus("j", {w: c for w, c in zip(names, ys) if c})
    weak, strong = log_odds(ci, cj, 0.01), log_odds(ci, cj, 1.0)
    for w in weak.tokens:
        assert abs(strong[w][0]) <= abs(weak[w][0]) + 1e-12


def test_unequal_totals_can_grow_under_shrinkage():
    # documents why the shrinkage property is only claimed for equal totals
    ci, cj = TokenCorpus("i", {"x": 100, "pad": 9900}), TokenCorpus("j", {"x": 1, "pad": 99})
    assert abs(log_odds(ci, cj, 1.0)["x"][0]) > abs(log_odds(ci, cj, 0.01)["x"][0])


def test_top_k_and_csv():
    ci = TokenCorpus("fine", {"rsi": 30, "macd": 20, "shared": 10})
    cj = TokenCorpus("coarse", {"price": 25, "path": 15, "shared": 10})
    r = log_odds(ci, cj)
    left, right = top_k(r, 2)
    assert [t for t, _ in left] == ["rsi", "macd"]
    assert [t for t, _ in right] == ["price", "path"]
    rows = list(csv.DictReader(io.StringIO(log_odds_csv(r))))
    assert [row["token"] for row in rows][0] == "rsi" and len(rows) == 5
    assert float(rows[0]["z"]) == r["rsi"][2]


def test_corpus_validation_and_merge():
    with pytest.raises(ValueError):
        TokenCorpus("x", {"a": 0})
    c = TokenCorpus.from_texts("x", ["up b", "b c"]).add(TokenCorpus("y", {"c": 2}))
    assert c.counts == {"up": 1, "b": 2, "c": 3} and c.label == "x"
    with pytest.raises(ValueError):
        log_odds(TokenCorpus("x", {}), c)
    with pytest.raises(ValueError):
        log_odds(c, c, prior_scale=0)
