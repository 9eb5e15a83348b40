"""Independent brute-force references used by the tests."""

from collections import Counter, defaultdict
from itertools import product

import numpy as np


def walk_chains(edges, n, k):
    """(i, j) -> Counter of relation chains over all k-edge walks, by explicit enumeration."""
    out_edges = defaultdict(list)
    for s, r, o in edges:
        out_edges[s].append((r, o))
    result = defaultdict(Counter)

    def go(start, node, chain):
        if len(chain) == k:
            result[(start, node)][tuple(chain)] += 1
            return
        for r, o in out_edges[node]:
            go(start, o, chain + [r])

    for i in range(n):
        go(i, i, [])
    return result


def walk_sum(edges, n, k, rel_value, mode="sum"):
    """Cell values of P^k from edge-value products summed over walks.

    ``rel_value`` maps relation index to its prime; a walk's weight is the
    product of its per-hop cell values (sum or product of the primes on that
    hop's node pair).
    """
    cell = defaultdict(lambda: 0 if mode == "sum" else 1)
    pairs = set()
    for s, r, o in edges:
        if mode == "sum":
            cell[(s, o)] += rel_value[r]
        else:
            cell[(s, o)] *= rel_value[r]
        pairs.add((s, o))
    succ = defaultdict(list)
    for s, o in sorted(pairs):
        succ[s].append(o)
    total = defaultdict(int)

    def go(start, node, depth, weight):
        if depth == k:
            total[(start, node)] += weight
            return
        for o in succ[node]:
            go(start, o, depth + 1, weight * cell[(node, o)])

    for i in range(n):
        go(i, i, 0, 1)
    return {key: v for key, v in total.items() if v}


def sieve(limit):
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, int(limit**0.5) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return np.flatnonzero(flags).tolist()


def brute_rules(edges, n, k, rel_value):
    """(body multiset of pk values, head prime) -> (support, body_count) by direct counting."""
    pk = walk_sum(edges, n, k, rel_value, "sum")
    heads = defaultdict(set)
    for s, r, o in edges:
        heads[(s, o)].add(rel_value[r])
    body_count = Counter(pk.values())
    support = Counter()
    for pair, v in pk.items():
        for h in heads.get(pair, ()):
            support[(v, h)] += 1
    return {key: (s, body_count[key[0]]) for key, s in support.items()}


def slow_mrr(ranks):
    total = 0.0
    for r in ranks:
        total += 1.0 / r
    return total / len(ranks)


def slow_hits(ranks, at=3):
    return sum(1 for r in ranks if r <= at) / len(ranks)


def all_pairs(n):
    return product(range(n), repeat=2)


def walk_sums_upto(edges, n, k_max, rel_value):
    """[P_+^1, ..., P_+^k_max] as dicts, from one DFS that records every depth."""
    cell = defaultdict(int)
    for s, r, o in edges:
        cell[(s, o)] += rel_value[r]
    succ = defaultdict(list)
    for s, o in sorted(cell):
        succ[s].append(o)
    totals = [defaultdict(int) for _ in range(k_max)]

    def go(start, node, depth, weight):
        if depth:
            totals[depth - 1][(start, node)] += weight
        if depth == k_max:
            return
        for o in succ[node]:
            go(start, o, depth + 1, weight * cell[(node, o)])

    for i in range(n):
        go(i, i, 0, 1)
    return [dict(t) for t in totals]
