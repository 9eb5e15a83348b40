"""Loading triple files and graph collections into indexed graphs."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ContractError, EmptyGraphError, ParseError

log = logging.getLogger(__name__)

Triple = tuple[str, str, str]


@dataclass(frozen=True, eq=False)
class RelGraph:
    """Directed multi-relational graph over integer node and relation ids.

    ``edges`` is an ``(E, 3)`` int64 array of ``(subject, relation, object)``
    rows in file order; ``entities``/``relations`` list labels by index.
    """

    entities: tuple[str, ...]
    relations: tuple[str, ...]
    edges: np.ndarray
    duplicates_dropped: int = 0
    entity_index: dict = field(init=False, repr=False)
    relation_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "entity_index", {e: i for i, e in enumerate(self.entities)})
        object.__setattr__(self, "relation_index", {r: i for i, r in enumerate(self.relations)})
        if len(self.entity_index) != len(self.entities):
            raise ContractError("entity labels must be unique")
        if len(self.relation_index) != len(self.relations):
            raise ContractError("relation labels must be unique")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 3)
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    @property
    def num_nodes(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def __eq__(self, other):
        return (
            isinstance(other, RelGraph)
            and self.entities == other.entities
            and self.relations == other.relations
            and np.array_equal(self.edges, other.edges)
        )

    def triples(self) -> Iterable[Triple]:
        for s, r, o in self.edges.tolist():
            yield self.entities[s], self.relations[r], self.entities[o]

    def out_adjacency(self) -> list[list[tuple[int, int]]]:
        """Per node, the ``(relation, object)`` pairs of its outgoing edges."""
        adj = [[] for _ in range(self.num_nodes)]
        for s, r, o in self.edges.tolist():
            adj[s].append((r, o))
        return adj

    @classmethod
    def from_triples(
        cls,
        triples: Iterable[Triple],
        entities: Iterable[str] = (),
        relations: Iterable[str] = (),
    ) -> "RelGraph":
        """Index labelled triples; dictionaries grow in first-appearance order.

        ``entities``/``relations`` pre-seed the dictionaries (shared vocabularies).
        """
        ent = {e: i for i, e in enumerate(entities)}
        rel = {r: i for i, r in enumerate(relations)}
        seen = set()
        rows = []
        dupes = 0
        for s, r, o in triples:
            si = ent.setdefault(s, len(ent))
            ri = rel.setdefault(r, len(rel))
            oi = ent.setdefault(o, len(ent))
            key = (si, ri, oi)
            if key in seen:
                dupes += 1
                continue
            seen.add(key)
            rows.append(key)
        return cls(tuple(ent), tuple(rel), np.array(rows, dtype=np.int64).reshape(-1, 3), dupes)


def read_triples(path: str | Path) -> list[Triple]:
    path = Path(path)
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise ParseError(path, lineno, line)
            out.append((parts[0], parts[1], parts[2]))
    return out


def load_triples(path: str | Path, format: str = "tsv") -> RelGraph:
    if format != "tsv":
        raise ContractError(f"unsupported triple format {format!r}")
    triples = read_triples(path)
    if not triples:
        raise EmptyGraphError(f"{path}: no triples")
    g = RelGraph.from_triples(triples)
    if g.duplicates_dropped:
        log.info("%s: dropped %d duplicate triples", path, g.duplicates_dropped)
    return g


def write_triples(g: RelGraph, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for s, r, o in g.triples():
            fh.write(f"{s}\t{r}\t{o}\n")


def typed_relation_label(head_type: str, relation: str, tail_type: str) -> str:
    return f"{head_type}-{relation}-{tail_type}"


def compose_typed_relations(
    g: RelGraph,
    node_types: Mapping,
    relations: Iterable[str] = (),
) -> RelGraph:
    """Replace each relation by the ``type(s)-r-type(o)`` triple type.

    ``node_types`` may be keyed by entity label or by node index.
    """

    def type_of(i):
        label = g.entities[i]
        if label in node_types:
            return node_types[label]
        if i in node_types:
            return node_types[i]
        raise ContractError(f"node {label!r} has no type label")

    types = [type_of(i) for i in range(g.num_nodes)]
    rel = {r: i for i, r in enumerate(relations)}
    rows = []
    for s, r, o in g.edges.tolist():
        label = typed_relation_label(types[s], g.relations[r], types[o])
        rows.append((s, rel.setdefault(label, len(rel)), o))
    return RelGraph(g.entities, tuple(rel), np.array(rows, dtype=np.int64).reshape(-1, 3))


@dataclass(frozen=True)
class SplitBundle:
    """Train/valid/test triples over one shared pair of dictionaries."""

    entities: tuple[str, ...]
    relations: tuple[str, ...]
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    overlaps: tuple = ()

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.valid), len(self.test)

    def graph(self, split: str = "train") -> RelGraph:
        """The split's edges as a graph over all entities of the bundle."""
        return RelGraph(self.entities, self.relations, getattr(self, split))


def load_splits(train: str | Path, valid: str | Path, test: str | Path) -> SplitBundle:
    """Load three triple files; a triple already in an earlier split is dropped with a warning."""
    raw = [read_triples(p) for p in (train, valid, test)]
    ent: dict[str, int] = {}
    rel: dict[str, int] = {}
    seen: dict[tuple, str] = {}
    names = ("train", "valid", "test")
    arrays = []
    overlaps = []
    for name, triples in zip(names, raw):
        rows = []
        local = set()
        for s, r, o in triples:
            key = (ent.setdefault(s, len(ent)), rel.setdefault(r, len(rel)), ent.setdefault(o, len(ent)))
            if key in local:
                continue
            if key in seen:
                overlaps.append((name, seen[key], (s, r, o)))
                continue
            local.add(key)
            rows.append(key)
        for key in local:
            seen[key] = name
        arrays.append(np.array(rows, dtype=np.int64).reshape(-1, 3))
    if overlaps:
        listing = "; ".join(f"{t} in {a} and {b}" for a, b, t in overlaps[:20])
        warnings.warn(f"{len(overlaps)} overlapping triples dropped from later splits: {listing}", stacklevel=2)
    return SplitBundle(tuple(ent), tuple(rel), *arrays, overlaps=tuple(overlaps))


@dataclass(frozen=True)
class GraphCollection:
    """Independent graphs sharing one relation dictionary, with numeric targets."""

    names: tuple[str, ...]
    graphs: tuple[RelGraph, ...]
    targets: np.ndarray  # (num_graphs, T)

    @property
    def relations(self) -> tuple[str, ...]:
        return self.graphs[0].relations if self.graphs else ()

    def __len__(self):
        return len(self.graphs)


def _read_types(path: Path) -> dict[str, str]:
    types = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(path, lineno, line, "expected node<TAB>type")
            types[parts[0]] = parts[1]
    return types


def _read_targets(path: Path) -> list[float]:
    values = [float(tok) for tok in path.read_text(encoding="utf-8").split()]
    if not values:
        raise ContractError(f"{path}: no target values")
    if not all(math.isfinite(v) for v in values):
        raise ContractError(f"{path}: non-finite target value")
    return values


def make_collection(
    items: Iterable[tuple[str, list[Triple], Mapping | None, list[float]]],
) -> GraphCollection:
    """Build a collection from ``(name, triples, node_types or None, targets)`` items.

    Relation labels (typed where node types are given) are indexed over the
    whole collection so that every graph maps a relation to the same prime.
    """
    items = list(items)
    rel: dict[str, int] = {}
    staged = []
    for name, triples, types, targets in items:
        g = RelGraph.from_triples(triples)
        if types is not None:
            g = compose_typed_relations(g, types)
        for r in g.relations:
            rel.setdefault(r, len(rel))
        staged.append((name, g, targets))
    relations = tuple(rel)
    graphs = []
    for _, g, _ in staged:
        remap = np.array([rel[r] for r in g.relations], dtype=np.int64)
        edges = g.edges.copy()
        if len(edges):
            edges[:, 1] = remap[edges[:, 1]]
        graphs.append(RelGraph(g.entities, relations, edges))
    arity = {len(t) for _, _, t in staged}
    if len(arity) > 1:
        raise ContractError(f"targets have differing arity across graphs: {sorted(arity)}")
    targets = np.array([t for _, _, t in staged], dtype=float).reshape(len(staged), -1)
    if not np.all(np.isfinite(targets)):
        raise ContractError("non-finite target value")
    return GraphCollection(tuple(n for n, _, _ in staged), tuple(graphs), targets)


def load_graph_collection(root: str | Path) -> GraphCollection:
    """One sub-directory per graph: ``edges.tsv``, optional ``types.tsv``, ``targets.tsv``."""
    root = Path(root)
    items = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        types_path = d / "types.tsv"
        items.append(
            (
                d.name,
                read_triples(d / "edges.tsv"),
                _read_types(types_path) if types_path.exists() else None,
                _read_targets(d / "targets.tsv"),
            )
        )
    if not items:
        raise EmptyGraphError(f"{root}: no graph directories")
    return make_collection(items)
