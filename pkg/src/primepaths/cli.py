"""``primepaths`` command line: PAM powers, BoP tasks, rule mining and pair paths.

Every command writes into ``--out``: its result files, ``metrics.tsv``,
``manifest.json`` (full config echo plus input hashes) and ``timing.json``.
Wall time lives only in ``timing.json`` so that the other files are
byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bop import fit_tfidf, write_features
from .errors import CellOverflowError, ContractError, PamError, ResourceError
from .ingest import load_graph_collection, load_splits, load_triples
from .lossless import extract_paths_for_pair, lossless_power, write_lossless
from .pam import build_pam, histogram, power, write_histogram, write_pam
from .rules import mine_rules, write_rules
from .tasks import (
    LabeledNodes,
    classify_nodes,
    compute_pams,
    format_chain,
    graph_bags,
    node_features,
    path_importance,
    regress_graphs,
    relation_features,
    predict_relations,
    write_importance,
    write_metrics,
)

log = logging.getLogger("primepaths")

COMMANDS = ("power", "node", "relation", "graph-regress", "rules", "paths")


@dataclass
class RunConfig:
    command: str = ""
    triples: str | None = None
    train: str | None = None
    valid: str | None = None
    test: str | None = None
    labels: str | None = None
    graphs: str | None = None
    k: int = 2
    mode: str = "sum"
    alpha: float = 2.0
    min_df: int = 2
    max_df: float = 0.99
    vocab: int = 10000
    neighbors: int = 20
    model: str = "knn"
    threads: int = 1
    bigint: bool = False
    order: str = "lexicographic"
    seed: int = 0
    test_fraction: float = 0.2
    exclude_target: bool = True
    min_support: int = 1
    min_confidence: float = 0.0
    head: str | None = None
    tail: str | None = None
    top: int = 20
    out: str = "out"

    def validate(self) -> None:
        if self.k < 1:
            raise ContractError("k must be >= 1")
        if self.alpha <= 0:
            raise ContractError("alpha must be > 0")
        if self.min_df < 0:
            raise ContractError("min_df must be >= 0")
        if not 0 < self.max_df <= 1:
            raise ContractError("max_df must lie in (0, 1]")
        if self.mode not in ("sum", "product", "lossless"):
            raise ContractError(f"unknown mode {self.mode!r}")
        if self.threads < 1:
            raise ContractError("threads must be >= 1")
        if not 0 < self.test_fraction < 1:
            raise ContractError("test_fraction must lie in (0, 1)")


def _coerce(value: str, kind):
    kind = str(kind)
    if "bool" in kind:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ContractError(f"not a boolean: {value!r}")
    if "int" in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    return value


def read_config(path: str | Path) -> dict:
    """Flat ``key = value`` (or ``key: value``) lines; ``#`` starts a comment."""
    types = {f.name: f.type for f in fields(RunConfig)}
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":"
        if sep not in line:
            raise ContractError(f"{path}:{lineno}: expected key = value")
        key, value = (x.strip() for x in line.split(sep, 1))
        key = key.replace("-", "_")
        if key not in types or key == "command":
            raise ContractError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(value, types[key])
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="primepaths", description="Prime adjacency matrices and bag-of-paths tasks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    s = argparse.SUPPRESS
    common.add_argument("--config", default=None, help="flat key=value file; flags override it")
    common.add_argument("--k", type=int, default=s, help="number of hops (default 2)")
    common.add_argument("--mode", choices=["sum", "product", "lossless"], default=s)
    common.add_argument("--alpha", type=float, default=s, help="self weight in neighbour aggregation")
    common.add_argument("--min-df", dest="min_df", type=int, default=s)
    common.add_argument("--max-df", dest="max_df", type=float, default=s, help="max document-frequency ratio")
    common.add_argument("--vocab", type=int, default=s, help="vocabulary cap")
    common.add_argument("--neighbors", type=int, default=s)
    common.add_argument("--model", choices=["knn", "linear", "constant"], default=s)
    common.add_argument("--threads", type=int, default=s)
    common.add_argument("--bigint", action="store_true", default=s, help="arbitrary-precision cells")
    common.add_argument("--order", choices=["lexicographic", "encounter"], default=s, help="chain prime order")
    common.add_argument("--seed", type=int, default=s)
    common.add_argument("--out", default=s, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("power", parents=[common], help="write P^1..P^k and their histograms")
    p.add_argument("--triples", default=s)

    p = sub.add_parser("node", parents=[common], help="node classification")
    p.add_argument("--triples", default=s)
    p.add_argument("--labels", default=s, help="entity<TAB>label[<TAB>train|test]")
    p.add_argument("--test-fraction", dest="test_fraction", type=float, default=s)
    p.add_argument("--top", type=int, default=s)

    p = sub.add_parser("relation", parents=[common], help="relation prediction")
    p.add_argument("--train", default=s)
    p.add_argument("--valid", default=s)
    p.add_argument("--test", default=s)
    p.add_argument("--keep-target", dest="exclude_target", action="store_false", default=s)

    p = sub.add_parser("graph-regress", parents=[common], help="graph-level regression")
    p.add_argument("--graphs", default=s, help="collection directory")
    p.add_argument("--test-fraction", dest="test_fraction", type=float, default=s)
    p.add_argument("--top", type=int, default=s)

    p = sub.add_parser("rules", parents=[common], help="mine k-hop Horn rules")
    p.add_argument("--triples", default=s)
    p.add_argument("--min-support", dest="min_support", type=int, default=s)
    p.add_argument("--min-confidence", dest="min_confidence", type=float, default=s)

    p = sub.add_parser("paths", parents=[common], help="relation chains of k-hop walks between two entities")
    p.add_argument("--triples", default=s)
    p.add_argument("--head", default=s)
    p.add_argument("--tail", default=s)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = read_config(args.config) if args.config else {}
    names = {f.name for f in fields(RunConfig)}
    values.update({k: v for k, v in vars(args).items() if k in names})
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _need(cfg: RunConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ContractError(f"{cfg.command} needs --{', --'.join(m.replace('_', '-') for m in missing)}")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(f.relative_to(path).as_posix().encode())
            h.update(b"\0")
            h.update(f.read_bytes())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


def write_manifest(cfg: RunConfig, out: Path) -> None:
    inputs = {}
    for name in ("triples", "train", "valid", "test", "labels", "graphs"):
        p = getattr(cfg, name)
        if p is not None:
            inputs[name] = {"path": p, "sha256": _sha256(Path(p))}
    manifest = {"version": __version__, "config": asdict(cfg), "inputs": inputs}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- commands


def cmd_power(cfg: RunConfig, out: Path) -> dict:
    _need(cfg, "triples")
    g = load_triples(cfg.triples)
    metrics = {"num_nodes": g.num_nodes, "num_relations": g.num_relations, "num_edges": g.num_edges}
    if cfg.mode == "lossless":
        p1 = build_pam(g, "product", bigint=True)
        levels = lossless_power(p1, cfg.k, order=cfg.order)
        for p in levels:
            write_lossless(p, out / f"pam_k{p.k}.txt")
            p.path_dict.write(out / f"pathdict_k{p.k}.tsv")
            write_histogram(histogram(p), out / f"hist_k{p.k}.tsv")
            metrics[f"nnz_k{p.k}"] = p.nnz
            metrics[f"chains_k{p.k}"] = len(p.path_dict)
    else:
        p1 = build_pam(g, cfg.mode, bigint=cfg.bigint)
        p1.rel_primes.write(out / "pathdict_k1.tsv")
        for p in power(p1, cfg.k, threads=cfg.threads):
            write_pam(p, out / f"pam_k{p.k}.txt")
            write_histogram(histogram(p), out / f"hist_k{p.k}.tsv")
            metrics[f"nnz_k{p.k}"] = p.nnz
    return metrics


def _read_labels(path: str, entity_index: dict, cfg: RunConfig) -> LabeledNodes:
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise ContractError(f"{path}:{lineno}: expected entity<TAB>label[<TAB>split]")
        if parts[0] not in entity_index:
            raise ContractError(f"{path}:{lineno}: unknown entity {parts[0]!r}")
        rows.append((entity_index[parts[0]], parts[1], parts[2] if len(parts) == 3 else None))
    if all(r[2] is not None for r in rows):
        train = [(n, lab) for n, lab, s in rows if s == "train"]
        test = [(n, lab) for n, lab, s in rows if s == "test"]
    else:
        perm = np.random.default_rng(cfg.seed).permutation(len(rows))
        n_test = max(1, int(round(cfg.test_fraction * len(rows))))
        test_set = set(perm[:n_test].tolist())
        train = [(n, lab) for idx, (n, lab, _) in enumerate(rows) if idx not in test_set]
        test = [(n, lab) for idx, (n, lab, _) in enumerate(rows) if idx in test_set]
    return LabeledNodes(tuple(train), tuple(test))


def cmd_node(cfg: RunConfig, out: Path) -> dict:
    _need(cfg, "triples", "labels")
    g = load_triples(cfg.triples)
    labels = _read_labels(cfg.labels, g.entity_index, cfg)
    pams, rel_primes = compute_pams(g, cfg.k, cfg.mode, cfg.threads, cfg.bigint)
    fm = node_features(g, pams, cfg.alpha, cfg.min_df, cfg.max_df, cfg.vocab)
    write_features(fm, out / "features.txt", out / "vocab.tsv", list(g.entities))
    res = classify_nodes(fm, labels, cfg.model, cfg.neighbors)
    with (out / "predictions.tsv").open("w", encoding="utf-8") as fh:
        for (n, lab), pred in zip(labels.test, res.predictions):
            fh.write(f"{g.entities[n]}\t{lab}\t{pred}\n")
    # importance of each path value for the first class (one-vs-rest over labelled nodes)
    labelled = list(labels.train) + list(labels.test)
    first = labels.classes[0]
    idx = [n for n, _ in labelled]
    target = [1.0 if lab == first else 0.0 for _, lab in labelled]
    rows = path_importance(
        fm.weights[idx], fm.vocabulary, target, rel_primes, g.relations, [(g, pams)], cfg.top
    )
    write_importance(rows, out / "importance.tsv")
    return {
        "accuracy": res.accuracy,
        "num_train": len(labels.train),
        "num_test": len(labels.test),
        "vocab_size": len(fm.vocabulary),
        "importance_class": first,
    }


def cmd_relation(cfg: RunConfig, out: Path) -> dict:
    _need(cfg, "train", "valid", "test")
    bundle = load_splits(cfg.train, cfg.valid, cfg.test)
    g = bundle.graph("train")
    pams, rel_primes = compute_pams(g, cfg.k, cfg.mode, cfg.threads, cfg.bigint)
    queries = bundle.test
    train_x, query_x = relation_features(
        pams, rel_primes, bundle.train, queries[:, [0, 2]], cfg.min_df, cfg.max_df, cfg.vocab, cfg.exclude_target
    )
    res = predict_relations(train_x, bundle.train[:, 1], query_x, queries[:, 1], g.num_relations, cfg.neighbors)
    with (out / "ranks.tsv").open("w", encoding="utf-8") as fh:
        for (h, r, t), rank in zip(queries.tolist(), res.ranks):
            fh.write(f"{bundle.entities[h]}\t{bundle.relations[r]}\t{bundle.entities[t]}\t{rank}\n")
    return {
        "mrr": res.mrr,
        "hits@3": res.hits_at_3,
        "num_queries": len(res.ranks),
        "fallback_queries": res.fallback_queries,
        "overlaps_dropped": len(bundle.overlaps),
    }


def cmd_graph_regress(cfg: RunConfig, out: Path) -> dict:
    _need(cfg, "graphs")
    coll = load_graph_collection(cfg.graphs)
    bags = graph_bags(coll, cfg.k, cfg.mode)
    fm = fit_tfidf(bags, cfg.min_df, cfg.max_df, cfg.vocab)
    write_features(fm, out / "features.txt", out / "vocab.tsv", list(coll.names))
    n = len(coll)
    perm = np.random.default_rng(cfg.seed).permutation(n)
    n_test = max(1, int(round(cfg.test_fraction * n)))
    test_idx, train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    x = fm.weights
    res = regress_graphs(
        x[train_idx], coll.targets[train_idx], x[test_idx], coll.targets[test_idx], cfg.model, cfg.neighbors
    )
    metrics = {f"mae_t{t}": m for t, m in enumerate(res.mae)}
    metrics["mean_mae"] = res.mean_mae
    metrics["num_train"] = len(train_idx)
    metrics["num_test"] = len(test_idx)
    metrics["vocab_size"] = len(fm.vocabulary)
    rel_primes = None
    sources = []
    for g in coll.graphs:
        if g.num_edges:
            pams, rel_primes = compute_pams(g, cfg.k, cfg.mode, rel_primes=rel_primes)
            sources.append((g, pams))
    rows = path_importance(x, fm.vocabulary, coll.targets[:, 0], rel_primes, coll.relations, sources, cfg.top)
    write_importance(rows, out / "importance.tsv")
    return metrics


def cmd_rules(cfg: RunConfig, out: Path) -> dict:
    _need(cfg, "triples")
    g = load_triples(cfg.triples)
    p1 = build_pam(g, "product", bigint=cfg.bigint or cfg.mode == "lossless")
    if cfg.mode == "lossless":
        pk = lossless_power(p1, cfg.k, order=cfg.order)[-1]
    elif cfg.mode == "product":
        pk = power(p1, cfg.k, threads=cfg.threads)[-1]
    else:
        pk = power(build_pam(g, "sum", bigint=cfg.bigint), cfg.k, threads=cfg.threads)[-1]
    rules = mine_rules(p1, pk, cfg.min_support, cfg.min_confidence, p1.rel_primes)
    write_rules(rules, out / "rules.tsv", p1.rel_primes, g.relations)
    return {
        "num_rules": len(rules),
        "num_confident_rules": sum(r.confidence == 1.0 for r in rules),
        "max_confidence": max((r.confidence for r in rules), default=0.0),
    }


def cmd_paths(cfg: RunConfig, out: Path) -> dict:
    _need(cfg, "triples", "head", "tail")
    g = load_triples(cfg.triples)
    for name in (cfg.head, cfg.tail):
        if name not in g.entity_index:
            raise ContractError(f"unknown entity {name!r}")
    i, j = g.entity_index[cfg.head], g.entity_index[cfg.tail]
    metrics = {}
    with (out / "paths.tsv").open("w", encoding="utf-8") as fh:
        fh.write("hops\tchain\tcount\n")
        for k in range(1, cfg.k + 1):
            chains = extract_paths_for_pair(g, i, j, k)
            for c in sorted(chains):
                fh.write(f"{k}\t{format_chain(c, g.relations)}\t{chains[c]}\n")
            metrics[f"walks_k{k}"] = sum(chains.values())
    return metrics


HANDLERS = {
    "power": cmd_power,
    "node": cmd_node,
    "relation": cmd_relation,
    "graph-regress": cmd_graph_regress,
    "rules": cmd_rules,
    "paths": cmd_paths,
}


def run(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg, out)
    t0 = time.perf_counter()
    metrics = HANDLERS[cfg.command](cfg, out)
    elapsed = time.perf_counter() - t0
    write_metrics(metrics, out / "metrics.tsv")
    (out / "timing.json").write_text(json.dumps({"wall_time_seconds": elapsed}) + "\n", encoding="utf-8")
    return metrics


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        metrics = run(cfg)
    except CellOverflowError as exc:
        print(f"primepaths: overflow: {exc} (rerun with --bigint)", file=sys.stderr)
        return 3
    except ResourceError as exc:
        print(f"primepaths: resource limit: {exc}", file=sys.stderr)
        return 4
    except (PamError, ValueError, OSError) as exc:
        print(f"primepaths: error: {exc}", file=sys.stderr)
        return 2
    for key, value in metrics.items():
        print(f"{key}\t{value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
