"""Lossless k-hop matrices.

Every nonzero cell of a lossless ``P^k`` is a product of primes, one per k-hop
walk, where each prime names the walk's relation chain through a
:class:`~primepaths.primes.PathDict`. Cells are stored as ``prime -> multiplicity``
maps; the integer value is materialized on demand.
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ContractError, ResourceError
from .ingest import RelGraph
from .pam import Pam, build_pam
from .primes import Chain, PathDict, PrimeStream

DEFAULT_MAX_FACTORS = 10**7


class LosslessPam:
    mode = "lossless"

    def __init__(self, n: int, k: int, rows: list[dict[int, Counter]], path_dict: PathDict):
        self.n = n
        self.k = k
        self.rows = rows
        self.path_dict = path_dict
        self._values: dict[tuple[int, int], int] = {}
        self._cols = None

    def __repr__(self):
        return f"LosslessPam(n={self.n}, k={self.k}, nnz={self.nnz}, chains={len(self.path_dict)})"

    @property
    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    @property
    def num_factors(self) -> int:
        """Number of stored (cell, prime) entries."""
        return sum(len(c) for r in self.rows for c in r.values())

    def factors(self, i: int, j: int) -> Counter:
        return Counter(self.rows[i].get(j, ()))

    def value(self, i: int, j: int) -> int:
        key = (i, j)
        v = self._values.get(key)
        if v is None:
            f = self.rows[i].get(j)
            if not f:
                return 0
            v = 1
            for p, m in f.items():
                v *= p**m
            self._values[key] = v
        return v

    get = value

    def __getitem__(self, ij):
        return self.value(*ij)

    def row(self, i: int) -> dict[int, int]:
        return {j: self.value(i, j) for j in sorted(self.rows[i])}

    def col(self, j: int) -> dict[int, int]:
        if self._cols is None:
            cols = [[] for _ in range(self.n)]
            for i, r in enumerate(self.rows):
                for c in r:
                    cols[c].append(i)
            self._cols = cols
        return {i: self.value(i, j) for i in self._cols[j]}

    def items(self) -> Iterator[tuple[int, int, int]]:
        for i, r in enumerate(self.rows):
            for j in sorted(r):
                yield i, j, self.value(i, j)

    def values(self) -> list[int]:
        return [v for _, _, v in self.items()]

    def to_dict(self) -> dict[tuple[int, int], int]:
        return {(i, j): v for i, j, v in self.items()}

    def to_pam(self) -> Pam:
        return Pam.from_cells(self.n, self.to_dict(), k=self.k, mode="lossless", bigint=True)


def from_product_pam(p1: Pam) -> LosslessPam:
    """The one-hop product PAM is already lossless: factor each cell over phi_1."""
    if p1.k != 1 or p1.mode != "product":
        raise ContractError("lossless base case needs the one-hop product-mode PAM")
    if p1.rel_primes is None:
        raise ContractError("the one-hop PAM carries no relation prime dictionary")
    rows: list[dict[int, Counter]] = [{} for _ in range(p1.n)]
    for i, j, v in p1.items():
        rows[i][j] = p1.rel_primes.factor_counts(v)
    return LosslessPam(p1.n, 1, rows, p1.rel_primes)


def aggregate(paths: Iterable[Chain] | Counter, dict_k: PathDict, stream: PrimeStream | None = None) -> int:
    """Encode a multiset of k-hop chains as the product of their primes (0 if empty)."""
    items = paths.items() if isinstance(paths, Counter) else ((p, 1) for p in paths)
    value = 1
    seen = False
    for path, m in items:
        value *= dict_k.assign(path, stream) ** m
        seen = True
    return value if seen else 0


def chain(k_value: int, one_hop_value: int, dict_k: PathDict, dict_1: PathDict) -> Counter:
    """Every k-hop chain of ``k_value`` extended by every relation of ``one_hop_value``."""
    left = dict_k.decode(k_value)
    right = dict_1.decode(one_hop_value)
    out = Counter()
    for pk, mk in left.items():
        for r, m1 in right.items():
            out[pk + r] += mk * m1
    return out


def _extend(
    prev: LosslessPam,
    one: LosslessPam,
    dict_next: PathDict,
    stream: PrimeStream | None,
    max_factors: int,
) -> LosslessPam:
    inv_k = prev.path_dict.inverse
    inv_1 = one.path_dict.inverse
    joined: dict[tuple[int, int], int] = {}
    rows: list[dict[int, Counter]] = []
    total = 0
    k_next = prev.k + 1
    for i in range(prev.n):
        pending: dict[int, list] = {}
        for nc in sorted(prev.rows[i]):
            hop = one.rows[nc]
            if not hop:
                continue
            fk = prev.rows[i][nc]
            left = sorted(fk.items())
            for j in sorted(hop):
                bucket = pending.setdefault(j, [])
                right = sorted(hop[j].items())
                for pk, mk in left:
                    for p1, m1 in right:
                        bucket.append((pk, p1, mk * m1))
        out: dict[int, Counter] = {}
        for j in sorted(pending):
            cell = Counter()
            for pk, p1, m in pending[j]:
                p = joined.get((pk, p1))
                if p is None:
                    p = dict_next.assign(inv_k[pk] + inv_1[p1], stream)
                    joined[(pk, p1)] = p
                cell[p] += m
            out[j] = cell
            total += len(cell)
        if total > max_factors:
            raise ResourceError(k_next, total, max_factors)
        rows.append(out)
    return LosslessPam(prev.n, k_next, rows, dict_next)


def lossless_power(
    p1: Pam | LosslessPam,
    k_target: int,
    stream: PrimeStream | None = None,
    order: str = "lexicographic",
    max_factors: int = DEFAULT_MAX_FACTORS,
) -> list[LosslessPam]:
    """``[P^1, ..., P^k_target]`` in lossless mode; each level owns its phi_k.

    With ``order="lexicographic"`` chain primes follow base-|R| rank; with
    ``order="encounter"`` they are drawn from ``stream`` (a fresh stream from 2
    per hop order when none is given) in row-major sweep order.
    """
    if k_target < 1:
        raise ContractError("k_target must be >= 1")
    base = p1 if isinstance(p1, LosslessPam) else from_product_pam(p1)
    if base.k != 1:
        raise ContractError("lossless_power expects the one-hop matrix")
    num_relations = max((c[0] for c in base.path_dict.forward), default=-1) + 1
    levels = [base]
    for k in range(2, k_target + 1):
        if order == "lexicographic":
            d = PathDict(k, order="lexicographic", num_relations=max(num_relations, 1))
            s = stream
        else:
            d = PathDict(k)
            s = stream if stream is not None else PrimeStream()
        levels.append(_extend(levels[-1], base, d, s, max_factors))
    return levels


def lossless_from_graph(g: RelGraph, k_target: int, rel_primes: PathDict | None = None, **kw) -> list[LosslessPam]:
    return lossless_power(build_pam(g, "product", rel_primes, bigint=True), k_target, **kw)


def decompose_cell(p: LosslessPam, i: int, j: int) -> Counter:
    """The k-hop chains (with multiplicity) encoded at ``(i, j)``; empty if absent."""
    f = p.rows[i].get(j)
    if not f:
        return Counter()
    inv = p.path_dict.inverse
    return Counter({inv[q]: m for q, m in f.items()})


def extract_paths_for_pair(g: RelGraph, i: int, j: int, k: int) -> Counter:
    """Relation chains of all directed k-edge walks from ``i`` to ``j`` (DFS).

    Nodes that cannot reach ``j`` in the remaining number of hops are pruned.
    """
    if k < 1:
        raise ContractError("k must be >= 1")
    out_adj = g.out_adjacency()
    in_adj = [[] for _ in range(g.num_nodes)]
    for s, _, o in g.edges.tolist():
        in_adj[o].append(s)
    # reach[l] = nodes with a walk of exactly l hops to j
    reach = [{j}]
    for _ in range(k - 1):
        reach.append({s for v in reach[-1] for s in in_adj[v]})
    found = Counter()

    def dfs(node, remaining, prefix):
        if remaining == 0:
            if node == j:
                found[prefix] += 1
            return
        allowed = reach[remaining - 1]
        for r, o in out_adj[node]:
            if o in allowed:
                dfs(o, remaining - 1, prefix + (r,))

    dfs(i, k, ())
    return found


def write_lossless(p: LosslessPam, path: str | Path) -> None:
    """``row col f1,f2,...`` lines (factors ascending, repeated by multiplicity)."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"%pam k={p.k} mode=lossless n={p.n}\n")
        for i, r in enumerate(p.rows):
            for j in sorted(r):
                factors = sorted(r[j].elements())
                fh.write(f"{i} {j} {','.join(map(str, factors))}\n")


def read_lossless(path: str | Path, path_dict: PathDict) -> LosslessPam:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
    n = int(meta["n"])
    rows: list[dict[int, Counter]] = [{} for _ in range(n)]
    for line in lines[1:]:
        if line:
            i, j, fs = line.split()
            rows[int(i)][int(j)] = Counter(int(x) for x in fs.split(","))
    return LosslessPam(n, int(meta["k"]), rows, path_dict)

