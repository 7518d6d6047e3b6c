import json

import numpy as np
import pytest

from fpsim.analysis import (
    DegenerateVariance, InsufficientStrictPairs, base_graph_census, correlation_iou_ged, density_map_2d, histogram,
    opposition_rate, originality_iou, sample_pairs, topn_distribution_sweep, unique_ged_values, write_stats,
)
from fpsim.core import AccessGraph, FloorPlan, MissingPairs, PairScore, SemanticImage
from fpsim.ged import is_isomorphic
from fpsim.rank import ScoreCache, pairwise_miou
from fpsim.ssig import EmptyInput
from fpsim.synth import synthetic_corpus

from oracles import random_graph


def recs(rows):
    return [PairScore(f"a{k}", f"b{k}", miou=m, nged=g) for k, (m, g) in enumerate(rows)]


def test_histogram_examples():
    h = histogram([0.3] * 5, bins=10)
    assert h.sum() == 1.0 and h[3] == 1.0
    grid = (np.arange(100) + 0.5) / 100
    assert np.allclose(histogram(grid, bins=10), 0.1)
    h = histogram([-5.0, 5.0], bins=4)
    assert h[0] == 0.5 and h[-1] == 0.5
    with pytest.raises(EmptyInput):
        histogram([], 10)
    with pytest.raises(ValueError):
        histogram([0.1], 10, range=(1.0, 1.0))


def test_histogram_mode_follows_sample():
    rng = np.random.default_rng(0)
    h = histogram(np.clip(rng.normal(0.25, 0.05, 5000), 0, 1), bins=20)
    assert int(np.argmax(h)) in (4, 5)


def test_originality():
    c = ScoreCache()
    c.append([PairScore("a", "b", miou=0.4)])
    assert originality_iou("a", c) == 0.4
    c.append([PairScore("a", "c", miou=0.2), PairScore("b", "c", miou=0.1)])
    assert originality_iou("a", c) == pytest.approx(0.3)
    with pytest.raises(MissingPairs):
        originality_iou("a", c, ids=["a", "b", "zz"])


def test_originality_duplicate_raises_mean(categories):
    corpus = synthetic_corpus(6, seed=9)
    base, _ = pairwise_miou(corpus, categories)
    dup = FloorPlan("dup", corpus[0].image, corpus[0].graph)
    with_dup, _ = pairwise_miou(corpus + [dup], categories)
    pid = corpus[0].id
    assert originality_iou(pid, with_dup) > originality_iou(pid, base)


def test_originality_matches_brute_mean(cache200):
    ids = cache200.ids()
    scores = {i: originality_iou(i, cache200) for i in ids[:25]}
    brute = {i: sum(cache200.miou(i, o) for o in ids if o != i) / (len(ids) - 1) for i in ids[:25]}
    assert sorted(scores, key=scores.get) == sorted(brute, key=brute.get)
    assert all(scores[i] == pytest.approx(brute[i], abs=1e-12) for i in scores)


def test_census_examples():
    g = AccessGraph.build([0, 1], [(0, 1)])
    h = AccessGraph.build([1, 0], [(0, 1)])
    census = base_graph_census({"x": g, "y": h, "z": g})
    assert census.groups[0][1] == 3 and len(census.groups) == 1
    trio = {"p": AccessGraph.build([0]), "q": AccessGraph.build([1]), "r": g}
    census = base_graph_census(trio)
    assert [c for _, c in census.groups] == [1, 1, 1]
    assert census.graph_originality("p") == 1


def test_census_agrees_with_isomorphism_and_excludes_big():
    rng = np.random.default_rng(1)
    graphs = {f"g{k:03d}": random_graph(rng, 4, n_types=2, p_edge=0.5) for k in range(100)}
    graphs["huge"] = AccessGraph.build([0] * 13)
    census = base_graph_census(graphs)
    assert census.excluded == ["huge"]
    assert sum(c for _, c in census.groups) == 100
    counts = [c for _, c in census.groups]
    assert counts == sorted(counts, reverse=True)
    ids = sorted(census.assignment)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            same = census.assignment[a] == census.assignment[b]
            assert same == is_isomorphic(graphs[a], graphs[b])


def test_correlation_exact():
    assert correlation_iou_ged(recs([(0.1, 0.3), (0.2, 0.2), (0.3, 0.1)])) == pytest.approx(1.0, abs=1e-12)
    assert correlation_iou_ged(recs([(0.1, 0.1), (0.2, 0.2), (0.3, 0.3)])) == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(DegenerateVariance):
        correlation_iou_ged(recs([(0.1, 0.1), (0.1, 0.2)]))
    with pytest.raises(DegenerateVariance):
        correlation_iou_ged(recs([(0.1, 0.1)]))


def test_opposition_examples():
    assert opposition_rate(recs([(0.1, 0.9), (0.9, 0.1)])) == 0.0
    assert opposition_rate(recs([(0.1, 0.1), (0.9, 0.9)])) == 1.0
    with pytest.raises(InsufficientStrictPairs):
        opposition_rate(recs([(0.1, 0.1), (0.1, 0.9)]))
    with pytest.raises(InsufficientStrictPairs):
        opposition_rate(recs([(0.1, 0.1)]))


def test_opposition_sampled_is_deterministic_and_close():
    rng = np.random.default_rng(2)
    rows = [(float(m), float(g)) for m, g in rng.uniform(0, 1, (300, 2))]
    full = opposition_rate(recs(rows))
    a = opposition_rate(recs(rows), sample_count=20_000, seed=7)
    b = opposition_rate(recs(rows), sample_count=20_000, seed=7)
    assert a == b and abs(a - full) < 0.02


def test_density_examples():
    d = density_map_2d(recs([(0.5, 0.5)]), 4, 4)
    assert d.sum() == 1.0 and d[2, 2] == 1.0
    d = density_map_2d(recs([(0.51, 0.52), (0.55, 0.6)]), 4, 4)
    assert d[2, 2] == 1.0
    with pytest.raises(EmptyInput):
        density_map_2d([], 4, 4)


def test_density_marginal_matches_histogram():
    rng = np.random.default_rng(3)
    rows = recs([(float(m), float(g)) for m, g in rng.uniform(0, 1, (10_000, 2))])
    d = density_map_2d(rows, 25, 30)
    assert np.allclose(d.sum(axis=1), histogram([r.miou for r in rows], 25), atol=1e-12)


def test_sample_pairs():
    ids = [f"p{i}" for i in range(30)]
    assert len(sample_pairs(ids, 10_000)) == 435
    s = sample_pairs(ids, 100, seed=3)
    assert len(set(s)) == 100 and all(a < b for a, b in s)
    assert s == sample_pairs(ids, 100, seed=3)


def test_unique_ged_values():
    rows = [PairScore("a", "b", ged=1), PairScore("a", "c", ged=1), PairScore("b", "c", ged=3), PairScore("c", "d")]
    assert unique_ged_values(rows) == 2


def test_sweep_identical_corpus(categories):
    plan = synthetic_corpus(1, seed=0)[0]
    corpus = [FloorPlan(f"same{k}", plan.image, plan.graph) for k in range(4)]
    cache, _ = pairwise_miou(corpus, categories)
    (point,) = topn_distribution_sweep(corpus, cache, [3], bins=10)
    assert point.mean_miou == 1.0 and point.mean_nged == 0.0 and point.mean_ssig == 1.0
    assert point.miou_hist[-1] == 1.0 and point.nged_hist[0] == 1.0 and point.ssig_hist[-1] == 1.0


def test_sweep_n1_vs_full(categories):
    corpus = synthetic_corpus(15, seed=4)
    cache, _ = pairwise_miou(corpus, categories)
    first, last = topn_distribution_sweep(corpus, cache, [1, 14])
    assert first.mean_miou >= last.mean_miou
    with pytest.raises(ValueError):
        topn_distribution_sweep(corpus, cache, [])


def test_write_stats(tmp_path):
    rng = np.random.default_rng(5)
    rows = [PairScore(f"a{k}", f"b{k}", miou=float(m), ged=int(g * 9), nged=float(g))
            for k, (m, g) in enumerate(rng.uniform(0, 1, (50, 2)))]
    census = base_graph_census({"x": AccessGraph.build([0]), "y": AccessGraph.build([0])})
    summary = write_stats(tmp_path, rows, census, sample_count=1000, seed=4)
    for name in ("iou_hist.csv", "ged_hist.csv", "census.csv", "density.csv", "summary.json"):
        assert (tmp_path / name).exists()
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert {"pearson_r", "opposition_rate", "sample_seed", "sample_count"} <= set(doc)
    assert doc == summary and doc["sample_seed"] == 4
    assert (tmp_path / "census.csv").read_text().splitlines()[1].endswith(",2")
    again = write_stats(tmp_path / "again", rows, census, sample_count=1000, seed=4)
    assert again == summary
    assert (tmp_path / "density.csv").read_bytes() == (tmp_path / "again" / "density.csv").read_bytes()
