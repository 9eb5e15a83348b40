"""Bag-of-Paths features and their tf-idf weighting.

A bag is a ``Counter`` from path value (a nonzero cell of some ``P^n``) to the
number of times it was collected for an entity. Matrices passed in as
``pams`` only need ``row``, ``col``, ``get`` and ``values`` (both
:class:`~primepaths.pam.Pam` and :class:`~primepaths.lossless.LosslessPam` do).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, EmptyVocabularyError
from .ingest import RelGraph

BopVector = Counter

TFIDF_VARIANT = "tf*(1+ln((1+n)/(1+df))),l2"


def _check_node(pams, node):
    n = pams[0].n
    if not 0 <= node < n:
        raise IndexError(f"node {node} outside 0..{n - 1}")


def bop_node(pams: Sequence, node: int) -> Counter:
    """Nonzero values of row ``node`` and column ``node`` over every hop order."""
    _check_node(pams, node)
    bag = Counter()
    for p in pams:
        bag.update(p.row(node).values())
        bag.update(p.col(node).values())
    return bag


def bop_node_split(pams: Sequence, node: int) -> tuple[Counter, Counter]:
    """Outgoing and incoming bags kept apart."""
    _check_node(pams, node)
    out, inc = Counter(), Counter()
    for p in pams:
        out.update(p.row(node).values())
        inc.update(p.col(node).values())
    return out, inc


def bop_pair(pams: Sequence, head: int, tail: int) -> tuple[Counter, Counter]:
    """Values at ``(head, tail)`` (forward) and ``(tail, head)`` (backward) across hop orders."""
    _check_node(pams, head)
    _check_node(pams, tail)
    fwd, bwd = Counter(), Counter()
    for p in pams:
        v = p.get(head, tail)
        if v:
            fwd[v] += 1
        v = p.get(tail, head)
        if v:
            bwd[v] += 1
    return fwd, bwd


def bop_graph(pams: Sequence) -> Counter:
    bag = Counter()
    for p in pams:
        bag.update(p.values())
    return bag


@dataclass
class FeatureMatrix:
    """Weighted rows over a fixed vocabulary of path values.

    ``weights`` is a CSR matrix with one row per entity; ``vocabulary[c]`` is
    the path value of column ``c``.
    """

    vocabulary: list[int]
    weights: sp.csr_array
    df: np.ndarray
    idf: np.ndarray
    num_documents: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = {v: c for c, v in enumerate(self.vocabulary)}

    @property
    def shape(self):
        return self.weights.shape

    def dense(self) -> np.ndarray:
        return self.weights.toarray()

    def transform(self, bags: Sequence[Counter]) -> sp.csr_array:
        """Weight new bags with the fitted vocabulary and idf."""
        return _weigh(count_matrix(bags, self.vocabulary, self.index), self.idf)


def count_matrix(bags: Sequence[Counter], vocabulary: Sequence[int], index: dict | None = None) -> sp.csr_array:
    """Raw counts of ``vocabulary`` values per bag."""
    index = index if index is not None else {v: c for c, v in enumerate(vocabulary)}
    rows, cols, vals = [], [], []
    for r, bag in enumerate(bags):
        for v, c in bag.items():
            col = index.get(v)
            if col is not None:
                rows.append(r)
                cols.append(col)
                vals.append(c)
    return sp.csr_array(
        (np.array(vals, dtype=np.float64), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(len(bags), len(vocabulary)),
    )


def _weigh(counts: sp.csr_array, idf: np.ndarray) -> sp.csr_array:
    w = sp.csr_array(counts @ sp.diags_array(idf)) if counts.shape[1] else sp.csr_array(counts)
    norms = np.sqrt(np.asarray(w.multiply(w).sum(axis=1)).ravel())
    norms[norms == 0] = 1.0
    return sp.csr_array(sp.diags_array(1.0 / norms) @ w)


def fit_tfidf(
    bags: Sequence[Counter],
    min_df: int = 2,
    max_df_ratio: float = 0.99,
    vocab_cap: int = 10000,
) -> FeatureMatrix:
    """Vocabulary filtering plus tf-idf weighting of a collection of bags.

    A path value is kept when ``min_df <= df <= max_df_ratio * len(bags)``; the
    survivors are truncated to the ``vocab_cap`` most frequent (total count,
    ties to the smaller value). Weights are ``tf * (1 + ln((1+n)/(1+df)))``
    with each row scaled to unit L2 norm. Columns are ordered by path value.
    """
    if not bags:
        raise ContractError("fit_tfidf needs at least one bag")
    if not 0 < max_df_ratio <= 1:
        raise ContractError("max_df_ratio must lie in (0, 1]")
    n = len(bags)
    df = Counter()
    total = Counter()
    for bag in bags:
        df.update(bag.keys())
        total.update(bag)
    max_df = max_df_ratio * n
    kept = [v for v in df if min_df <= df[v] <= max_df]
    if not kept:
        raise EmptyVocabularyError(
            f"every path value was filtered out (min_df={min_df}, max_df_ratio={max_df_ratio}, {n} bags)"
        )
    kept.sort(key=lambda v: (-total[v], v))
    vocabulary = sorted(kept[:vocab_cap])
    dfs = np.array([df[v] for v in vocabulary], dtype=np.float64)
    idf = 1.0 + np.log((1.0 + n) / (1.0 + dfs))
    index = {v: c for c, v in enumerate(vocabulary)}
    weights = _weigh(count_matrix(bags, vocabulary, index), idf)
    params = {"min_df": min_df, "max_df_ratio": max_df_ratio, "vocab_cap": vocab_cap, "tfidf": TFIDF_VARIANT}
    return FeatureMatrix(vocabulary, weights, dfs.astype(np.int64), idf, n, params)


def neighbor_aggregate(features: FeatureMatrix, g: RelGraph, alpha: float) -> FeatureMatrix:
    """``alpha * F(x)`` plus the mean row of x's undirected 1-hop neighbours."""
    n = g.num_nodes
    if features.shape[0] != n:
        raise ContractError(f"{features.shape[0]} feature rows for {n} nodes")
    s, o = g.edges[:, 0], g.edges[:, 2]
    mask = s != o
    a = sp.coo_array(
        (np.ones(2 * int(mask.sum())), (np.r_[s[mask], o[mask]], np.r_[o[mask], s[mask]])), shape=(n, n)
    ).tocsr()
    a.data[:] = 1.0  # duplicates collapse to one neighbour
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    mean = sp.diags_array(inv) @ a @ features.weights
    h = sp.csr_array(alpha * features.weights + mean)
    return replace(features, weights=h, params={**features.params, "alpha": alpha})


def write_features(
    fm: FeatureMatrix,
    path: str | Path,
    vocab_path: str | Path,
    entity_ids: Sequence[str] | None = None,
    metadata: dict | None = None,
) -> None:
    """Sparse ``entity_id index:weight ...`` rows plus a ``index value`` vocabulary file."""
    meta = {**fm.params, **(metadata or {})}
    header = "# " + " ".join(f"{k}={meta[k]}" for k in sorted(meta))
    w = sp.csr_array(fm.weights)
    w.sort_indices()
    ids = entity_ids if entity_ids is not None else [str(i) for i in range(w.shape[0])]
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for r in range(w.shape[0]):
            s = slice(w.indptr[r], w.indptr[r + 1])
            cells = " ".join(f"{c}:{v!r}" for c, v in zip(w.indices[s].tolist(), w.data[s].tolist()))
            fh.write(f"{ids[r]} {cells}".rstrip() + "\n")
    with Path(vocab_path).open("w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for c, v in enumerate(fm.vocabulary):
            fh.write(f"{c}\t{v}\n")


def hstack_blocks(blocks: Iterable[FeatureMatrix | None], num_rows: int) -> sp.csr_array:
    """Concatenate feature blocks column-wise; ``None`` stands for an empty block."""
    mats = [b.weights if b is not None else sp.csr_array((num_rows, 0)) for b in blocks]
    return sp.csr_array(sp.hstack(mats, format="csr")) if mats else sp.csr_array((num_rows, 0))


def idf_value(n: int, df: int) -> float:
    return 1.0 + math.log((1.0 + n) / (1.0 + df))
