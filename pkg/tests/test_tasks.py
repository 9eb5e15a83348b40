import warnings
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.neighbors import NearestNeighbors

from oracles import slow_hits, slow_mrr
from primepaths import toy
from primepaths.bop import count_matrix
from primepaths.errors import ContractError
from primepaths.ingest import RelGraph, SplitBundle
from primepaths.lossless import lossless_from_graph
from primepaths.primes import PathDict
from primepaths.tasks import (
    LabeledNodes,
    classify_nodes,
    compute_pams,
    graph_bags,
    nearest_neighbors,
    node_features,
    path_importance,
    pearson_columns,
    predict_relations,
    rank_relations,
    ranking_metrics,
    regress_graphs,
    row_is_zero,
    run_relation_prediction,
    write_importance,
    write_metrics,
)


# ---------------------------------------------------------------- metrics


@pytest.mark.parametrize(
    "ranks,mrr,h3",
    [
        ([1, 4], 0.625, 0.5),
        ([1], 1.0, 1.0),
        ([2, 3, 4], (1 / 2 + 1 / 3 + 1 / 4) / 3, 2 / 3),
        ([10, 10], 0.1, 0.0),
    ],
)
def test_ranking_metrics_table(ranks, mrr, h3):
    got_mrr, got_h3 = ranking_metrics(ranks)
    assert abs(got_mrr - mrr) <= 1e-12
    assert abs(got_h3 - h3) <= 1e-12


@given(st.lists(st.integers(1, 50), min_size=1, max_size=200))
@settings(max_examples=100, deadline=None)
def test_ranking_metrics_match_loop(ranks):
    mrr, h3 = ranking_metrics(np.array(ranks))
    assert abs(mrr - slow_mrr(ranks)) <= 1e-12
    assert abs(h3 - slow_hits(ranks)) <= 1e-12


@pytest.mark.parametrize("ranks", [[], [0, 1]])
def test_ranking_metrics_rejects(ranks):
    with pytest.raises(ContractError):
        ranking_metrics(ranks)


def test_rank_relations_ties_to_lower_index():
    assert rank_relations(np.array([0.2, 0.5, 0.5, 0.0])) == [1, 2, 0, 3]


# ---------------------------------------------------------------- k-NN


def test_neighbor_ties_go_to_lower_index():
    train = np.array([[1.0, 0], [2.0, 0], [0, 1.0]])
    assert nearest_neighbors(train, np.array([[3.0, 0]]), 2).tolist() == [[0, 1]]


def test_neighbors_match_sklearn(rng):
    train = rng.random((40, 6))
    query = rng.random((7, 6))
    ours = nearest_neighbors(train, query, 5)
    ref = NearestNeighbors(n_neighbors=5, metric="cosine", algorithm="brute").fit(train).kneighbors(query)[1]
    assert np.array_equal(ours, ref)


def test_row_is_zero():
    x = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert row_is_zero(x).tolist() == [True, False]


# ---------------------------------------------------------------- node classification


def _separable_split():
    g, labels = toy.separable_node_graph()
    items = sorted(labels.items())
    train = tuple((g.entity_index[e], lab) for i, (e, lab) in enumerate(items) if i % 3)
    test = tuple((g.entity_index[e], lab) for i, (e, lab) in enumerate(items) if i % 3 == 0)
    return g, LabeledNodes(train, test)


@pytest.mark.parametrize("model,n", [("knn", 1), ("knn", 3), ("linear", 1)])
def test_separable_nodes(model, n):
    g, labels = _separable_split()
    pams, _ = compute_pams(g, 1)
    fm = node_features(g, pams, alpha=2.0)
    assert classify_nodes(fm, labels, model, n).accuracy == 1.0


def test_labeled_nodes_disjoint():
    with pytest.raises(ContractError):
        LabeledNodes(((0, "a"),), ((0, "b"),))


def test_unseen_test_class_warns():
    x = np.eye(3)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = classify_nodes(x, LabeledNodes(((0, "a"), (1, "b")), ((2, "c"),)), "knn", 1)
    assert res.unseen_classes == ["c"]
    assert res.accuracy == 0.0
    assert caught


def test_knn_label_vote_tie_goes_to_lower_label():
    x = np.array([[1.0, 0.1], [1.0, -0.1], [1.0, 0.0]])
    res = classify_nodes(x, LabeledNodes(((0, "b"), (1, "a")), ((2, "a"),)), "knn", 2)
    assert res.predictions == ["a"]


# ---------------------------------------------------------------- relation prediction


def _rule_bundle(num_instances=50, test_every=5):
    g = RelGraph.from_triples(toy.rule_governed_triples(num_instances))
    r = g.relation_index["r"]
    is_test = np.array([row[1] == r and (row[0] // 3) % test_every == 0 for row in g.edges.tolist()])
    empty = np.zeros((0, 3), dtype=np.int64)
    return SplitBundle(g.entities, g.relations, g.edges[~is_test], empty, g.edges[is_test])


def test_rule_governed_kg_is_perfectly_ranked():
    bundle = _rule_bundle()
    assert len(bundle.test) == 10
    res = run_relation_prediction(bundle, k=2)
    assert res.mrr == 1.0
    assert res.hits_at_3 == 1.0


def test_zero_feature_queries_fall_back_to_frequency():
    train = np.array([[1.0, 0], [0, 1.0], [1.0, 1.0]])
    res = predict_relations(train, [2, 2, 0], np.zeros((1, 2)), [0], num_relations=3, n_neighbors=1)
    assert res.fallback_queries == 1
    assert res.rankings == [[2, 0, 1]]
    assert res.ranks == [2]


def test_relation_votes():
    train = np.array([[1.0, 0], [0.9, 0.1], [0, 1.0]])
    res = predict_relations(train, [1, 1, 0], np.array([[1.0, 0.05]]), [1], num_relations=2, n_neighbors=2)
    assert res.ranks == [1]


# ---------------------------------------------------------------- graph regression


def test_linear_target_is_recovered():
    coll = toy.molecule_collection(np.random.default_rng(7), num_graphs=80)
    bags = graph_bags(coll, k=1)
    vocab = sorted(set().union(*bags))
    x = count_matrix(bags, vocab)
    y = coll.targets
    res = regress_graphs(x[:60], y[:60], x[60:], y[60:], "linear")
    assert res.mean_mae < 1e-6


@pytest.mark.parametrize("model", ["knn", "constant"])
def test_regression_models_run(model):
    x = np.array([[0.0, 1], [1, 0], [1, 1], [0.5, 0.5]])
    y = np.array([1.0, 2, 3, 4])
    res = regress_graphs(x[:3], y[:3], x[3:], y[3:], model, n_neighbors=1)
    assert np.isfinite(res.mean_mae)


def test_regression_rejects_nan():
    with pytest.raises(ContractError):
        regress_graphs(np.eye(2), [1.0, np.nan], np.eye(2), [1.0, 2.0])


def test_graph_bags_share_primes():
    coll = toy.molecule_collection(np.random.default_rng(3), num_graphs=6)
    rel_primes = PathDict.for_relations(len(coll.relations))
    bags = graph_bags(coll, k=1)
    for g, bag in zip(coll.graphs, bags):
        expected = Counter(rel_primes.forward[(r,)] for r in g.edges[:, 1].tolist())
        assert bag == expected


# ---------------------------------------------------------------- path importance


def test_pearson_matches_numpy(rng):
    x = rng.random((30, 4))
    y = rng.random(30)
    r, zero = pearson_columns(x, y)
    ref = [np.corrcoef(x[:, c], y)[0, 1] for c in range(4)]
    assert np.allclose(r, ref)
    assert not zero.any()


def test_pearson_zero_variance():
    r, zero = pearson_columns(np.array([[1.0, 0], [1.0, 1]]), [0.0, 1.0])
    assert zero.tolist() == [True, False]
    assert r[0] == 0.0


def test_importance_finds_the_target_relation():
    coll = toy.molecule_collection(np.random.default_rng(7), num_graphs=40)
    rel_primes = PathDict.for_relations(len(coll.relations))
    bags = graph_bags(coll, k=1)
    vocab = sorted(set().union(*bags))
    x = count_matrix(bags, vocab)
    rows = path_importance(x, vocab, coll.targets[:, 0], rel_primes, coll.relations, top=3)
    top = rows[0]
    assert top.value == rel_primes.forward[(coll.relations.index("C-Single-C"),)]
    assert abs(top.correlation - 1.0) < 1e-12
    assert top.derivation == "(C-Single-C)"


def test_importance_derivations(fig1):
    lossless = lossless_from_graph(fig1, 2)
    pams, rel_primes = compute_pams(fig1, 2)
    vocab = [3, 10, 35]
    x = np.array([[1.0, 0, 2], [0, 1, 1], [2, 0, 0]])
    target = [1.0, 0.0, 2.0]
    by_value = {r.value: r for r in path_importance(x, vocab, target, rel_primes, fig1.relations, [(fig1, lossless)])}
    assert by_value[3].derivation == "(r1)"
    assert by_value[10].derivation == "(r1, r1) + (r1, r3)"
    assert "lossless" in by_value[10].flags
    by_value = {r.value: r for r in path_importance(x, vocab, target, rel_primes, fig1.relations, [(fig1, pams)])}
    assert by_value[35].derivation == "(r2, r3)"
    assert by_value[35].factorization == "5 × 7"
    assert "sampled" in by_value[35].flags
    assert by_value[10].derivation == "UNKNOWN"


def test_output_files(tmp_path, fig1):
    pams, rel_primes = compute_pams(fig1, 1)
    rows = path_importance(np.eye(3), [3, 5, 7], [1.0, 0.0, 0.0], rel_primes, fig1.relations)
    write_importance(rows, tmp_path / "imp.tsv")
    lines = (tmp_path / "imp.tsv").read_text().splitlines()
    assert lines[0] == "Value\tFactorization\tPath Derivation\tImportance"
    assert lines[1] == "3\t3\t(r1) [one-hop]\t1.000000"
    write_metrics({"mrr": 0.625, "n": 2}, tmp_path / "m.tsv")
    assert (tmp_path / "m.tsv").read_text() == "mrr\t0.625\nn\t2\n"
