import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_rules
from primepaths import toy
from primepaths.errors import ContractError
from primepaths.ingest import RelGraph
from primepaths.lossless import lossless_power
from primepaths.pam import build_pam, power
from primepaths.rules import Rule, mine_rules, write_rules


def _lossy(g, k):
    return build_pam(g, "product"), power(build_pam(g, "sum"), k)[-1]


def test_fig1_two_hop_rules(fig1):
    rules = mine_rules(*_lossy(fig1, 2))
    got = {(r.body_value, r.head): (r.support, r.body_count) for r in rules}
    assert got == {(30, 7): (1, 1), (15, 3): (1, 2), (35, 3): (1, 4)}
    assert [r.confidence for r in rules] == [1.0, 0.5, 0.25]


def test_thresholds(fig1):
    p1, p2 = _lossy(fig1, 2)
    assert [r.body_value for r in mine_rules(p1, p2, min_confidence=0.5)] == [30, 15]
    assert mine_rules(p1, p2, min_support=2) == []


def test_closed_path_rule_has_full_confidence():
    g = RelGraph.from_triples(toy.rule_governed_triples(20))
    rules = mine_rules(*_lossy(g, 2))
    assert len(rules) == 1
    r = rules[0]
    assert (r.body_value, r.head, r.support, r.body_count) == (3 * 5, 7, 20, 20)
    assert r.confidence == 1.0 and r.lossy


def test_lossless_rules_name_chains():
    g = RelGraph.from_triples(toy.rule_governed_triples(20))
    p1 = build_pam(g, "product", bigint=True)
    pk = lossless_power(p1, 2)[-1]
    rules = mine_rules(p1, pk)
    assert [(r.body_chain, r.head, r.confidence, r.lossy) for r in rules] == [((0, 1), 7, 1.0, False)]


@given(st.integers(0, 10**6), st.integers(3, 10), st.integers(1, 3), st.integers(2, 3))
@settings(max_examples=40, deadline=None)
def test_matches_brute_force(seed, n, r, k):
    g = toy.random_graph(np.random.default_rng(seed), n, r, 0.3)
    if g.num_edges == 0:
        return
    p1, pk = _lossy(g, k)
    table = {x: p1.rel_primes.forward[(x,)] for x in range(g.num_relations)}
    ref = brute_rules(g.edges.tolist(), n, k, table)
    got = {(x.body_value, x.head): (x.support, x.body_count) for x in mine_rules(p1, pk)}
    assert got == ref


def test_requires_product_one_hop(fig1):
    ps = build_pam(fig1, "sum")
    p2 = power(ps, 2)[-1]
    with pytest.raises(ContractError):
        mine_rules(ps, p2)
    with pytest.raises(ContractError):
        mine_rules(p2, p2)


def test_write_rules(tmp_path, fig1):
    p1, p2 = _lossy(fig1, 2)
    write_rules(mine_rules(p1, p2), tmp_path / "rules.tsv", p1.rel_primes, fig1.relations)
    lines = (tmp_path / "rules.tsv").read_text().splitlines()
    assert lines[0] == "body_value\tbody_chain\thead_relation\tsupport\tbody_count\tconfidence"
    assert lines[1] == "30\tUNKNOWN\tr3\t1\t1\t1.0"


def test_rule_confidence_property():
    assert Rule(15, 7, 3, 4).confidence == 0.75
