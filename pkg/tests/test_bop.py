from collections import Counter

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.feature_extraction.text import TfidfTransformer

from primepaths.bop import (
    bop_graph,
    bop_node,
    bop_node_split,
    bop_pair,
    count_matrix,
    fit_tfidf,
    hstack_blocks,
    idf_value,
    neighbor_aggregate,
    write_features,
)
from primepaths.errors import ContractError, EmptyVocabularyError
from primepaths.ingest import RelGraph

A, B = 0, 1


def test_node_bag_fig1(fig1_powers):
    assert bop_node(fig1_powers, A) == Counter({3: 2, 5: 1, 15: 1, 21: 1, 35: 1, 105: 2, 175: 1})


def test_node_bag_split(fig1_powers):
    out, inc = bop_node_split(fig1_powers, A)
    assert out + inc == bop_node(fig1_powers, A)
    assert inc == Counter({3: 1, 21: 1, 105: 1})


def test_pair_bag_fig1(fig1_powers):
    fwd, bwd = bop_pair(fig1_powers, A, B)
    assert fwd == Counter({3: 1, 35: 1})
    assert bwd == Counter({105: 1})
    assert sorted((fwd + bwd).elements()) == [3, 35, 105]


def test_graph_bag_is_histogram_sum(fig1_powers):
    assert bop_graph(fig1_powers[:2]) == Counter({3: 3, 5: 2, 7: 3, 15: 2, 21: 2, 30: 1, 35: 4, 49: 1})


def test_out_of_range_node(fig1_powers):
    with pytest.raises(IndexError):
        bop_node(fig1_powers, 9)


bags_strategy = st.lists(
    st.dictionaries(st.integers(2, 12), st.integers(1, 5), min_size=1, max_size=6).map(Counter),
    min_size=2,
    max_size=12,
)


@given(bags_strategy)
@settings(max_examples=80, deadline=None)
def test_weights_match_sklearn(bags):
    fm = fit_tfidf(bags, min_df=1, max_df_ratio=1.0)
    counts = count_matrix(bags, fm.vocabulary).toarray()
    ref = TfidfTransformer(norm="l2", use_idf=True, smooth_idf=True).fit_transform(counts).toarray()
    assert np.allclose(fm.dense(), ref, atol=1e-12)


def test_identical_bags_keep_value_when_max_df_allows():
    fm = fit_tfidf([Counter({3: 1}), Counter({3: 1})], min_df=2, max_df_ratio=1.0)
    assert fm.vocabulary == [3]
    assert np.allclose(fm.dense(), [[1.0], [1.0]])


def test_value_in_every_bag_dropped_by_default():
    with pytest.raises(EmptyVocabularyError):
        fit_tfidf([Counter({3: 1}), Counter({3: 1})])


def test_df_filtering():
    bags = [Counter({3: 1, 5: 1}), Counter({3: 1, 7: 2}), Counter({5: 1, 11: 1}), Counter({13: 1})]
    fm = fit_tfidf(bags, min_df=2, max_df_ratio=0.99)
    assert fm.vocabulary == [3, 5]
    assert fm.df.tolist() == [2, 2]
    assert np.isclose(fm.idf[0], idf_value(4, 2))
    # rows with no surviving value stay zero
    assert np.all(fm.dense()[3] == 0)


def test_vocab_cap_prefers_frequent_then_small():
    bags = [Counter({3: 5, 5: 1, 7: 1}), Counter({3: 1, 5: 1, 7: 1}), Counter({11: 1})]
    fm = fit_tfidf(bags, min_df=2, max_df_ratio=1.0, vocab_cap=2)
    assert fm.vocabulary == [3, 5]


def test_bad_max_df():
    with pytest.raises(ContractError):
        fit_tfidf([Counter({3: 1})], max_df_ratio=0)


def test_transform_uses_fitted_idf():
    bags = [Counter({3: 1}), Counter({5: 1}), Counter({3: 1, 5: 1})]
    fm = fit_tfidf(bags, min_df=1, max_df_ratio=1.0)
    assert np.allclose(fm.transform(bags).toarray(), fm.dense())


def test_neighbor_aggregate_by_hand():
    # path a -> b -> c plus a duplicate relation a -> b and a self loop on c
    g = RelGraph.from_triples([("a", "r", "b"), ("a", "s", "b"), ("b", "r", "c"), ("c", "r", "c")])
    bags = [Counter({3: 1}), Counter({5: 1}), Counter({7: 1})]
    fm = fit_tfidf(bags, min_df=1, max_df_ratio=1.0)
    h = neighbor_aggregate(fm, g, alpha=2.0).dense()
    f = fm.dense()
    expected = np.vstack([2 * f[0] + f[1], 2 * f[1] + (f[0] + f[2]) / 2, 2 * f[2] + f[1]])
    assert np.allclose(h, expected)


def test_neighbor_aggregate_isolated_node():
    g = RelGraph(("a", "b", "c"), ("r",), np.array([[0, 0, 1]]))
    fm = fit_tfidf([Counter({3: 1}), Counter({5: 1}), Counter({7: 1})], min_df=1, max_df_ratio=1.0)
    h = neighbor_aggregate(fm, g, alpha=1.5).dense()
    assert np.allclose(h[2], 1.5 * fm.dense()[2])


def test_neighbor_aggregate_row_mismatch(fig1):
    fm = fit_tfidf([Counter({3: 1}), Counter({3: 1})], min_df=1, max_df_ratio=1.0)
    with pytest.raises(ContractError):
        neighbor_aggregate(fm, fig1, 2.0)


def test_hstack_blocks_with_empty():
    fm = fit_tfidf([Counter({3: 1}), Counter({5: 1})], min_df=1, max_df_ratio=1.0)
    x = hstack_blocks([fm, None, fm], 2)
    assert x.shape == (2, 4)
    assert sp.issparse(x)


def test_write_features(tmp_path):
    fm = fit_tfidf([Counter({3: 1}), Counter({5: 2}), Counter()], min_df=1, max_df_ratio=1.0)
    write_features(fm, tmp_path / "f.txt", tmp_path / "v.tsv", ["x", "y", "z"], {"k": 2})
    lines = (tmp_path / "f.txt").read_text().splitlines()
    assert lines[0].startswith("# ") and "k=2" in lines[0] and "min_df=1" in lines[0]
    assert lines[1:] == ["x 0:1.0", "y 1:1.0", "z"]
    assert (tmp_path / "v.tsv").read_text().splitlines()[1:] == ["0\t3", "1\t5"]
