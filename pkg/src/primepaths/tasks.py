"""Desk-scale harnesses: node classification, relation prediction, graph regression.

Models are deliberately simple and deterministic: cosine k-NN (neighbour ties
go to the lower training index, label ties to the lower label) and ordinary
least squares.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .bop import FeatureMatrix, bop_graph, bop_node, bop_pair, fit_tfidf, hstack_blocks, neighbor_aggregate
from .errors import ContractError, EmptyVocabularyError
from .ingest import GraphCollection, RelGraph, SplitBundle
from .lossless import LosslessPam, decompose_cell, extract_paths_for_pair, lossless_power
from .pam import build_pam, power
from .primes import PathDict, factorize

log = logging.getLogger(__name__)

_QUERY_BATCH = 512


# ---------------------------------------------------------------- matrices


def compute_pams(g: RelGraph, k: int, mode: str = "sum", threads: int = 1, bigint: bool = False, rel_primes=None):
    """``[P^1..P^k]`` in the requested mode plus the phi_1 dictionary used."""
    if mode == "lossless":
        levels = lossless_power(build_pam(g, "product", rel_primes, bigint=True), k)
        return levels, levels[0].path_dict
    p = build_pam(g, mode, rel_primes, bigint=bigint)
    return power(p, k, threads=threads), p.rel_primes


# ---------------------------------------------------------------- k-NN


def _as_csr(x) -> sp.csr_array:
    if isinstance(x, FeatureMatrix):
        x = x.weights
    return sp.csr_array(x, dtype=np.float64)


def _normalize_rows(x: sp.csr_array) -> sp.csr_array:
    norms = np.sqrt(np.asarray(x.multiply(x).sum(axis=1)).ravel())
    inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return sp.csr_array(sp.diags_array(inv) @ x)


def nearest_neighbors(train, query, n_neighbors: int) -> np.ndarray:
    """Indices of the ``n_neighbors`` most cosine-similar training rows per query row.

    Equal similarities are ordered by ascending training index.
    """
    t = _normalize_rows(_as_csr(train))
    q = _normalize_rows(_as_csr(query))
    n = min(n_neighbors, t.shape[0])
    out = np.empty((q.shape[0], n), dtype=np.int64)
    tt = t.T.tocsc()
    for lo in range(0, q.shape[0], _QUERY_BATCH):
        sims = np.asarray((q[lo : lo + _QUERY_BATCH] @ tt).todense())
        for r, row in enumerate(sims):
            out[lo + r] = np.argsort(-row, kind="stable")[:n]
    return out


def row_is_zero(x) -> np.ndarray:
    x = _as_csr(x)
    return np.asarray(abs(x).sum(axis=1)).ravel() == 0


# ---------------------------------------------------------------- node classification


@dataclass(frozen=True)
class LabeledNodes:
    train: tuple[tuple[int, str], ...]
    test: tuple[tuple[int, str], ...]

    def __post_init__(self):
        overlap = {n for n, _ in self.train} & {n for n, _ in self.test}
        if overlap:
            raise ContractError(f"nodes {sorted(overlap)} are in both train and test")

    @property
    def classes(self) -> list[str]:
        return sorted({lab for _, lab in self.train} | {lab for _, lab in self.test})


@dataclass
class ClassificationResult:
    accuracy: float
    predictions: list[str]
    unseen_classes: list[str] = field(default_factory=list)


def _ols(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    xb = np.hstack([x, np.ones((x.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(xb, y, rcond=None)
    return coef


def _ols_predict(coef: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))]) @ coef


def classify_nodes(features, labels: LabeledNodes, model: str = "knn", n_neighbors: int = 1) -> ClassificationResult:
    """Fit on the train nodes, predict the test nodes, return exact-match accuracy."""
    x = _as_csr(features)
    train_idx = np.array([n for n, _ in labels.train], dtype=np.int64)
    test_idx = np.array([n for n, _ in labels.test], dtype=np.int64)
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise ContractError("need at least one train and one test node")
    if max(train_idx.max(), test_idx.max()) >= x.shape[0]:
        raise ContractError("a labelled node has no feature row")
    classes = sorted({lab for _, lab in labels.train})
    unseen = sorted({lab for _, lab in labels.test} - set(classes))
    if unseen:
        warnings.warn(f"test classes absent from training: {unseen}", stacklevel=2)
    cls_index = {c: i for i, c in enumerate(classes)}
    y = np.array([cls_index[lab] for _, lab in labels.train])
    if model == "knn":
        nbrs = nearest_neighbors(x[train_idx], x[test_idx], n_neighbors)
        pred = []
        for row in nbrs:
            votes = np.bincount(y[row], minlength=len(classes))
            pred.append(int(np.argmax(votes)))
    elif model == "linear":
        onehot = np.eye(len(classes))[y]
        coef = _ols(x[train_idx].toarray(), onehot)
        pred = np.argmax(_ols_predict(coef, x[test_idx].toarray()), axis=1).tolist()
    else:
        raise ContractError(f"unknown model {model!r}")
    predictions = [classes[p] for p in pred]
    correct = sum(p == lab for p, (_, lab) in zip(predictions, labels.test))
    return ClassificationResult(correct / len(test_idx), predictions, unseen)


def node_features(
    g: RelGraph,
    pams: Sequence,
    alpha: float = 2.0,
    min_df: int = 2,
    max_df_ratio: float = 0.99,
    vocab_cap: int = 10000,
) -> FeatureMatrix:
    """tf-idf weighted node bags followed by 1-hop neighbour aggregation."""
    bags = [bop_node(pams, v) for v in range(g.num_nodes)]
    fm = fit_tfidf(bags, min_df, max_df_ratio, vocab_cap)
    return neighbor_aggregate(fm, g, alpha)


# ---------------------------------------------------------------- relation prediction


@dataclass
class RankingResult:
    ranks: list[int]
    rankings: list[list[int]]
    mrr: float
    hits_at_3: float
    fallback_queries: int = 0


def ranking_metrics(ranks: Sequence[int]) -> tuple[float, float]:
    """Mean reciprocal rank and hits@3 of 1-based ranks."""
    if len(ranks) == 0:
        raise ContractError("no queries to score")
    ranks = np.asarray(ranks, dtype=np.float64)
    if np.any(ranks < 1):
        raise ContractError("ranks are 1-based")
    return float(np.mean(1.0 / ranks)), float(np.mean(ranks <= 3))


def rank_relations(scores: np.ndarray) -> list[int]:
    """Relations by descending score, equal scores by ascending relation index."""
    return np.lexsort((np.arange(len(scores)), -np.asarray(scores))).tolist()


def predict_relations(
    train_features,
    train_relations: Sequence[int],
    query_features,
    query_relations: Sequence[int],
    num_relations: int,
    n_neighbors: int = 20,
) -> RankingResult:
    """Rank every relation for each query pair by its vote share among the
    ``n_neighbors`` most similar training pairs.

    Queries with an all-zero feature row fall back to global training relation
    frequency.
    """
    train_rel = np.asarray(train_relations, dtype=np.int64)
    prior = np.bincount(train_rel, minlength=num_relations) / max(len(train_rel), 1)
    zero = row_is_zero(query_features)
    nbrs = nearest_neighbors(train_features, query_features, n_neighbors)
    ranks, rankings = [], []
    for q, true_r in enumerate(query_relations):
        if zero[q]:
            scores = prior
        else:
            scores = np.bincount(train_rel[nbrs[q]], minlength=num_relations) / nbrs.shape[1]
        order = rank_relations(scores)
        rankings.append(order)
        ranks.append(order.index(int(true_r)) + 1)
    mrr, h3 = ranking_metrics(ranks)
    return RankingResult(ranks, rankings, mrr, h3, int(zero.sum()))


def _without_edge(bag: Counter, value: int, removed: int, mode: str) -> Counter:
    bag = Counter(bag)
    bag[value] -= 1
    if bag[value] <= 0:
        del bag[value]
    rest = value - removed if mode == "sum" else value // removed
    if rest > 1 or (mode == "sum" and rest > 0):
        bag[rest] += 1
    return bag


def _fit_block(bags, min_df, max_df_ratio, vocab_cap, name):
    try:
        return fit_tfidf(bags, min_df, max_df_ratio, vocab_cap)
    except EmptyVocabularyError:
        log.warning("feature block %s is empty after filtering", name)
        return None


def relation_features(
    pams: Sequence,
    rel_primes: PathDict,
    train_triples: np.ndarray,
    query_pairs: np.ndarray,
    min_df: int = 2,
    max_df_ratio: float = 0.99,
    vocab_cap: int = 10000,
    exclude_target: bool = True,
) -> tuple[sp.csr_array, sp.csr_array]:
    """``[F(h,t) | F(t,h) | F(h) | F(t)]`` rows for training triples and query pairs.

    Each block has its own vocabulary. With ``exclude_target`` a training row
    does not see its own labelled edge in the one-hop forward cell, matching
    what a held-out query can see.
    """
    mode = pams[0].mode
    n_train = len(train_triples)
    fwd, bwd = [], []
    for h, r, t in np.asarray(train_triples).tolist():
        f, b = bop_pair(pams, h, t)
        if exclude_target:
            v = pams[0].get(h, t)
            if v:
                f = _without_edge(f, v, rel_primes.forward[(r,)], mode)
        fwd.append(f)
        bwd.append(b)
    for h, t in np.asarray(query_pairs).tolist():
        f, b = bop_pair(pams, h, t)
        fwd.append(f)
        bwd.append(b)
    n_nodes = pams[0].n
    node_fm = _fit_block([bop_node(pams, v) for v in range(n_nodes)], min_df, max_df_ratio, vocab_cap, "node")
    heads = np.r_[np.asarray(train_triples)[:, 0], np.asarray(query_pairs)[:, 0]].astype(np.int64)
    tails = np.r_[np.asarray(train_triples)[:, 2], np.asarray(query_pairs)[:, 1]].astype(np.int64)
    rows = len(fwd)
    blocks = [
        _fit_block(fwd, min_df, max_df_ratio, vocab_cap, "forward-pair"),
        _fit_block(bwd, min_df, max_df_ratio, vocab_cap, "backward-pair"),
    ]
    x = hstack_blocks(blocks, rows)
    if node_fm is not None:
        x = sp.csr_array(sp.hstack([x, node_fm.weights[heads], node_fm.weights[tails]], format="csr"))
    return x[:n_train], x[n_train:]


def run_relation_prediction(
    bundle: SplitBundle,
    k: int = 2,
    mode: str = "sum",
    n_neighbors: int = 20,
    min_df: int = 2,
    max_df_ratio: float = 0.99,
    vocab_cap: int = 10000,
    exclude_target: bool = True,
    split: str = "test",
    threads: int = 1,
) -> RankingResult:
    g = bundle.graph("train")
    pams, rel_primes = compute_pams(g, k, mode, threads)
    queries = getattr(bundle, split)
    train_x, query_x = relation_features(
        pams, rel_primes, bundle.train, queries[:, [0, 2]], min_df, max_df_ratio, vocab_cap, exclude_target
    )
    return predict_relations(train_x, bundle.train[:, 1], query_x, queries[:, 1], g.num_relations, n_neighbors)


# ---------------------------------------------------------------- graph regression


@dataclass
class RegressionResult:
    mae: list[float]
    mean_mae: float
    predictions: np.ndarray


def regress_graphs(
    train_features,
    train_targets,
    test_features,
    test_targets,
    model: str = "linear",
    n_neighbors: int = 5,
) -> RegressionResult:
    ytr = np.asarray(train_targets, dtype=np.float64)
    yte = np.asarray(test_targets, dtype=np.float64)
    ytr = ytr.reshape(len(ytr), -1)
    yte = yte.reshape(len(yte), -1)
    if not (np.all(np.isfinite(ytr)) and np.all(np.isfinite(yte))):
        raise ContractError("non-finite target value")
    if model == "constant":
        pred = np.tile(ytr.mean(axis=0), (len(yte), 1))
    elif model == "linear":
        coef = _ols(_as_csr(train_features).toarray(), ytr)
        pred = _ols_predict(coef, _as_csr(test_features).toarray())
    elif model == "knn":
        nbrs = nearest_neighbors(train_features, test_features, n_neighbors)
        pred = ytr[nbrs].mean(axis=1)
    else:
        raise ContractError(f"unknown model {model!r}")
    mae = np.abs(pred - yte).mean(axis=0)
    return RegressionResult(mae.tolist(), float(mae.mean()), pred)


def graph_bags(collection: GraphCollection, k: int, mode: str = "sum") -> list[Counter]:
    rel_primes = PathDict.for_relations(len(collection.relations))
    bags = []
    for g in collection.graphs:
        if g.num_edges == 0:
            bags.append(Counter())
            continue
        pams, _ = compute_pams(g, k, mode, rel_primes=rel_primes)
        bags.append(bop_graph(pams))
    return bags


# ---------------------------------------------------------------- path importance


@dataclass
class ImportanceRow:
    value: int
    factorization: str
    derivation: str
    correlation: float
    flags: tuple[str, ...] = ()


def pearson_columns(x, target) -> tuple[np.ndarray, np.ndarray]:
    """Pearson correlation of every column with ``target``; zero-variance columns give 0."""
    x = _as_csr(x).toarray() if sp.issparse(x) or isinstance(x, FeatureMatrix) else np.asarray(x, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt((xc**2).sum(axis=0))
    sy = math.sqrt(float((yc**2).sum()))
    denom = sx * sy
    zero = denom == 0
    r = np.divide(xc.T @ yc, denom, out=np.zeros(x.shape[1]), where=~zero)
    return r, zero


def format_chain(chain: Sequence[int], relation_labels: Sequence[str] | None) -> str:
    names = [relation_labels[r] if relation_labels is not None else f"r{r}" for r in chain]
    return "(" + ", ".join(names) + ")"


def format_multiset(chains: Counter, relation_labels) -> str:
    parts = []
    for c in sorted(chains):
        m = chains[c]
        s = format_chain(c, relation_labels)
        parts.append(f"{m}*{s}" if m > 1 else s)
    return " + ".join(parts)


def locate_values(sources: Sequence[tuple[RelGraph, Sequence]], values: Iterable[int]) -> dict:
    """First ``(source, k, i, j)`` occurrence of each wanted value, scanning row-major."""
    wanted = set(values)
    found = {}
    for s, (_, pams) in enumerate(sources):
        for p in pams:
            for i, j, v in p.items():
                if v in wanted and v not in found:
                    found[v] = (s, p.k, i, j)
            if len(found) == len(wanted):
                return found
    return found


def path_importance(
    features,
    vocabulary: Sequence[int],
    target,
    rel_primes: PathDict | None = None,
    relation_labels: Sequence[str] | None = None,
    sources: Sequence[tuple[RelGraph, Sequence]] | None = None,
    top: int | None = None,
) -> list[ImportanceRow]:
    """Vocabulary columns ranked by absolute Pearson correlation with ``target``.

    ``sources`` are ``(graph, [P^1..P^k])`` pairs used to locate a value and
    recover its chains: exactly for lossless matrices, by walk extraction for
    lossy ones (flagged ``sampled``).
    """
    r, zero = pearson_columns(features, target)
    order = sorted(range(len(vocabulary)), key=lambda c: (-abs(r[c]), vocabulary[c]))
    if top is not None:
        order = order[:top]
    chosen = [vocabulary[c] for c in order]
    where = locate_values(sources, chosen) if sources else {}
    known = rel_primes.primes() if rel_primes is not None else []
    rows = []
    for c in order:
        v = vocabulary[c]
        flags = ["zero-variance"] if zero[c] else []
        factors = factorize(v, known) if v > 1 else [v]
        factorization = " × ".join(map(str, factors))
        derivation = "UNKNOWN"
        hit = where.get(v)
        if hit is not None and isinstance(sources[hit[0]][1][hit[1] - 1], LosslessPam):
            s, k, i, j = hit
            derivation = format_multiset(decompose_cell(sources[s][1][k - 1], i, j), relation_labels)
            flags.append("lossless")
        elif rel_primes is not None and v in rel_primes.inverse:
            derivation = format_chain(rel_primes.inverse[v], relation_labels)
            flags.append("one-hop")
        elif hit is not None:
            s, k, i, j = hit
            derivation = format_multiset(extract_paths_for_pair(sources[s][0], i, j, k), relation_labels)
            flags.append("sampled")
        elif rel_primes is not None and all(f in rel_primes.inverse for f in factors):
            derivation = "{" + ", ".join(format_chain(rel_primes.inverse[f], relation_labels) for f in factors) + "}"
            flags.append("unordered")
        rows.append(ImportanceRow(v, factorization, derivation, float(r[c]), tuple(flags)))
    return rows


def write_importance(rows: Sequence[ImportanceRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("Value\tFactorization\tPath Derivation\tImportance\n")
        for row in rows:
            deriv = row.derivation + (f" [{','.join(row.flags)}]" if row.flags else "")
            fh.write(f"{row.value}\t{row.factorization}\t{deriv}\t{row.correlation:.6f}\n")


def write_metrics(metrics: dict, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for key, value in metrics.items():
            fh.write(f"{key}\t{value!r}\n" if isinstance(value, float) else f"{key}\t{value}\n")


__all__ = [
    "ClassificationResult",
    "ImportanceRow",
    "LabeledNodes",
    "RankingResult",
    "RegressionResult",
    "classify_nodes",
    "compute_pams",
    "graph_bags",
    "nearest_neighbors",
    "node_features",
    "path_importance",
    "predict_relations",
    "rank_relations",
    "ranking_metrics",
    "regress_graphs",
    "relation_features",
    "run_relation_prediction",
]
