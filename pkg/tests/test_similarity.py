import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from finegrain.agents import AblationMask, AgentPipeline, ScriptedBackend, TranscriptStore
from finegrain.analysis.similarity import OfflineEmbedder, cosine, embed, propagation_report, similarity_pairs
from finegrain.marketdata import slice_asof
from finegrain.util import month_of


def test_offline_embedder_is_deterministic_and_unit():
    e = OfflineEmbedder(dim=64)
    a = e.embed(["momentum rising", "", "!!!"])
    assert a.shape == (3, 64)
    assert np.allclose(np.linalg.norm(a, axis=1), 1.0)
    assert np.array_equal(a, OfflineEmbedder(dim=64).embed(["momentum rising", "", "!!!"]))
    assert not np.array_equal(a, OfflineEmbedder(dim=64, seed=1).embed(["momentum rising", "", "!!!"]))


def test_shared_words_raise_similarity():
    e = OfflineEmbedder()
    v = e.embed(["margin growth cash", "margin growth cash flow", "rates inflation currency"])
    assert cosine(v[0], v[1]) > 0.8 > cosine(v[0], v[2])
    assert cosine(v[0], v[0]) == pytest.approx(1.0)


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_cosine_bounds_and_symmetry(a, b):
    if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
        with pytest.raises(ValueError):
            cosine(a, b)
        return
    c = cosine(a, b)
    assert -1.0 <= c <= 1.0 and c == cosine(b, a)


def test_embed_rejects_zero_vectors():
    class Zero:
        def embed(self, texts):
            return np.zeros((len(texts), 3))

    with pytest.raises(ValueError):
        embed(["x"], Zero())


@pytest.fixture(scope="module")
def stores(repo, schedule):
    out = []
    for mask in (AblationMask(), AblationMask(frozenset(["news"]))):
        store = TranscriptStore()
        p = AgentPipeline(ScriptedBackend(), store)
        for dec, _ in schedule[:2]:
            for gran in ("fine", "coarse"):
                p.run_month(slice_asof(repo, dec), month_of(dec), gran, mask)
        out.append(store)
    return out


def test_pairs_stay_within_each_store(stores, repo):
    n = len(repo.tickers)
    pairs = similarity_pairs(stores, OfflineEmbedder())
    assert len(pairs[("technical", "fine")]) == 2 * 2 * n  # two masks, two months
    assert len(pairs[("news", "coarse")]) == 2 * n  # news excluded from the second store


def test_report_shape(stores):
    rep = propagation_report(stores, OfflineEmbedder())
    assert set(rep.rows) == {"technical", "quantitative", "qualitative", "news"}
    for row in rep.rows.values():
        assert row["diff"] == pytest.approx(row["fine"] - row["coarse"])
        assert -1 <= row["fine"] <= 1
    assert json.loads(rep.to_json())["counts"]["news"] == {"fine": 12, "coarse": 12}
