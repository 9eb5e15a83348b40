"""Prime adjacency matrices: multi-relational k-hop path counting with prime-coded relations."""

__version__ = "0.1.0"

from .bop import FeatureMatrix, bop_graph, bop_node, bop_pair, fit_tfidf, neighbor_aggregate
from .errors import (
    CellOverflowError,
    ContractError,
    DecodeError,
    EmptyGraphError,
    EmptyVocabularyError,
    PamError,
    ParseError,
    PrimeCapacityError,
    ResourceError,
)
from .ingest import GraphCollection, RelGraph, SplitBundle, load_graph_collection, load_splits, load_triples
from .lossless import LosslessPam, decompose_cell, extract_paths_for_pair, lossless_power
from .pam import Pam, build_pam, histogram, multiply, power
from .primes import PathDict, PrimeStream, nth_prime
from .rules import Rule, mine_rules
from .tasks import classify_nodes, path_importance, predict_relations, ranking_metrics, regress_graphs

__all__ = [
    "CellOverflowError",
    "ContractError",
    "DecodeError",
    "EmptyGraphError",
    "EmptyVocabularyError",
    "FeatureMatrix",
    "GraphCollection",
    "LosslessPam",
    "Pam",
    "PamError",
    "ParseError",
    "PathDict",
    "PrimeCapacityError",
    "PrimeStream",
    "RelGraph",
    "ResourceError",
    "Rule",
    "SplitBundle",
    "bop_graph",
    "bop_node",
    "bop_pair",
    "build_pam",
    "classify_nodes",
    "decompose_cell",
    "extract_paths_for_pair",
    "fit_tfidf",
    "histogram",
    "load_graph_collection",
    "load_splits",
    "load_triples",
    "lossless_power",
    "mine_rules",
    "multiply",
    "neighbor_aggregate",
    "nth_prime",
    "path_importance",
    "power",
    "predict_relations",
    "ranking_metrics",
    "regress_graphs",
]
