"""Small graphs with known answers: the worked examples plus synthetic tasks."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ingest import RelGraph, make_collection

# nodes A..E and relations r1, r2, r3 appear in index order (primes 3, 5, 7)
FIG1_TRIPLES = [
    ("A", "r1", "B"),
    ("A", "r2", "C"),
    ("D", "r1", "A"),
    ("B", "r2", "E"),
    ("C", "r3", "B"),
    ("D", "r3", "B"),
    ("D", "r1", "C"),
    ("E", "r3", "D"),
]

# nodes 0 and 1 joined by both relations
FIG2_TRIPLES = [("0", "r1", "1"), ("0", "r2", "1"), ("1", "r1", "2")]


def fig1_graph() -> RelGraph:
    return RelGraph.from_triples(FIG1_TRIPLES)


def fig2_graph() -> RelGraph:
    return RelGraph.from_triples(FIG2_TRIPLES)


def random_graph(
    rng: np.random.Generator,
    num_nodes: int,
    num_relations: int,
    density: float,
    self_loops: bool = True,
) -> RelGraph:
    """Each ordered node pair is linked with probability ``density`` by a
    random non-empty subset of relations (so multi-edges occur)."""
    rows = []
    for i in range(num_nodes):
        for j in range(num_nodes):
            if i == j and not self_loops:
                continue
            if rng.random() < density:
                rels = np.flatnonzero(rng.random(num_relations) < 0.5)
                if len(rels) == 0:
                    rels = [int(rng.integers(num_relations))]
                rows.extend((i, int(r), j) for r in rels)
    entities = tuple(f"n{i}" for i in range(num_nodes))
    relations = tuple(f"r{r}" for r in range(num_relations))
    return RelGraph(entities, relations, np.array(rows, dtype=np.int64).reshape(-1, 3))


def random_edge_graph(rng: np.random.Generator, num_nodes: int, num_edges: int, num_relations: int) -> RelGraph:
    """``num_edges`` uniformly random distinct triples (large, sparse graphs)."""
    s = rng.integers(num_nodes, size=num_edges)
    o = rng.integers(num_nodes, size=num_edges)
    r = rng.integers(num_relations, size=num_edges)
    edges = np.unique(np.stack([s, r, o], axis=1), axis=0)
    entities = tuple(f"n{i}" for i in range(num_nodes))
    relations = tuple(f"r{x}" for x in range(num_relations))
    return RelGraph(entities, relations, edges)


def separable_node_graph() -> tuple[RelGraph, dict[str, str]]:
    """20 nodes: 9 ``pos`` nodes send r1 to a sink, 9 ``neg`` nodes send r2 to another.

    Returns the graph and labels for the 18 source nodes.
    """
    triples = []
    labels = {}
    for i in range(9):
        triples.append((f"p{i}", "r1", "sink1"))
        labels[f"p{i}"] = "pos"
    for i in range(9):
        triples.append((f"q{i}", "r2", "sink2"))
        labels[f"q{i}"] = "neg"
    return RelGraph.from_triples(triples), labels


def rule_governed_triples(num_instances: int = 50) -> list[tuple[str, str, str]]:
    """``X -r1-> A -r2-> Y`` always comes with ``X -r-> Y``; ``Y -r4-> X'`` links instances."""
    triples = []
    for i in range(num_instances):
        x, a, y = f"x{i}", f"a{i}", f"y{i}"
        triples += [(x, "r1", a), (a, "r2", y), (x, "r", y)]
        triples.append((y, "r4", f"x{(i + 1) % num_instances}"))
    return triples


def molecule_collection(rng: np.random.Generator, num_graphs: int = 60, max_atoms: int = 9):
    """Random typed 'molecules'; the single target is the number of C-Single-C bonds."""
    return make_collection(molecule_items(rng, num_graphs, max_atoms))


def write_triples_file(triples, path: str | Path) -> Path:
    path = Path(path)
    path.write_text("".join(f"{s}\t{r}\t{o}\n" for s, r, o in triples), encoding="utf-8")
    return path


def write_collection(collection_items, root: str | Path) -> Path:
    """Write ``(name, triples, types, targets)`` items in the collection directory layout."""
    root = Path(root)
    for name, triples, types, targets in collection_items:
        d = root / name
        d.mkdir(parents=True, exist_ok=True)
        write_triples_file(triples, d / "edges.tsv")
        if types is not None:
            (d / "types.tsv").write_text("".join(f"{k}\t{v}\n" for k, v in types.items()), encoding="utf-8")
        (d / "targets.tsv").write_text("\t".join(repr(float(t)) for t in targets) + "\n", encoding="utf-8")
    return root


def molecule_items(rng: np.random.Generator, num_graphs: int = 60, max_atoms: int = 9):
    """The raw items behind :func:`molecule_collection` (for writing to disk)."""
    items = []
    for g in range(num_graphs):
        n = int(rng.integers(3, max_atoms + 1))
        atoms = [str(rng.choice(["C", "C", "N", "O"])) for _ in range(n)]
        triples = []
        for i in range(1, n):
            j = int(rng.integers(i))
            bond = str(rng.choice(["Single", "Single", "Double"]))
            triples.append((f"a{j}", bond, f"a{i}"))
        types = {f"a{i}": atoms[i] for i in range(n)}
        target = sum(1 for s, b, o in triples if b == "Single" and types[s] == "C" and types[o] == "C")
        items.append((f"mol{g:03d}", triples, types, [float(target)]))
    return items
