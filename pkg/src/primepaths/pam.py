"""One-hop Prime Adjacency Matrices and their (lossy) k-hop powers.

Cells hold unsigned 64-bit integers with checked arithmetic, or Python ints
when ``bigint=True``. Powers are successive one-hop extensions
``P^(n+1) = P^n x P`` under ordinary plus-times arithmetic.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterator

import numpy as np
import scipy.sparse as sp

from .errors import CellOverflowError, ContractError, EmptyGraphError
from .ingest import RelGraph
from .primes import UINT64_MAX, PathDict

MODES = ("product", "sum", "lossless")

# float64 shadow products below this bound certify that the uint64 result did not wrap
_SAFE_FLOAT = float(2**64) * (1 - 1e-9)


class Pam:
    """Square sparse matrix in CSR layout with only nonzero cells stored."""

    def __init__(self, n, k, mode, indptr, indices, data, rel_primes=None):
        if mode not in MODES:
            raise ContractError(f"unknown PAM mode {mode!r}")
        self.n = int(n)
        self.k = int(k)
        self.mode = mode
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = data if data.dtype == object else np.asarray(data, dtype=np.uint64)
        self.rel_primes = rel_primes
        self._csc = None

    @classmethod
    def from_scipy(cls, m, k, mode, rel_primes=None):
        m = sp.csr_array(m)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], k, mode, m.indptr, m.indices, m.data.astype(np.uint64), rel_primes)

    @classmethod
    def from_cells(cls, n, cells: dict, k=1, mode="sum", rel_primes=None, bigint=None):
        """Build from ``{(row, col): value}``; zero values are skipped."""
        items = sorted((ij, v) for ij, v in cells.items() if v)
        if bigint is None:
            bigint = any(v > UINT64_MAX for _, v in items)
        counts = np.zeros(n + 1, dtype=np.int64)
        for (i, _), _ in items:
            counts[i + 1] += 1
        indptr = np.cumsum(counts)
        indices = np.array([j for (_, j), _ in items], dtype=np.int64)
        values = [int(v) for _, v in items]
        data = np.array(values, dtype=object) if bigint else np.array(values, dtype=np.uint64)
        return cls(n, k, mode, indptr, indices, data, rel_primes)

    @property
    def bigint(self) -> bool:
        return self.data.dtype == object

    @property
    def nnz(self) -> int:
        return len(self.indices)

    @property
    def shape(self):
        return (self.n, self.n)

    def __repr__(self):
        return f"Pam(n={self.n}, k={self.k}, mode={self.mode!r}, nnz={self.nnz})"

    def as_scipy(self) -> sp.csr_array:
        if self.bigint:
            raise ContractError("arbitrary-precision cells have no scipy representation")
        return sp.csr_array((self.data, self.indices, self.indptr), shape=self.shape)

    def _row_slice(self, i):
        return slice(self.indptr[i], self.indptr[i + 1])

    def row(self, i: int) -> dict[int, int]:
        s = self._row_slice(i)
        return dict(zip(self.indices[s].tolist(), self.data[s].tolist()))

    def col(self, j: int) -> dict[int, int]:
        if self._csc is None:
            rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
            order = np.lexsort((rows, self.indices))
            colptr = np.zeros(self.n + 1, dtype=np.int64)
            np.add.at(colptr, self.indices + 1, 1)
            self._csc = (np.cumsum(colptr), rows[order], self.data[order])
        colptr, rows, data = self._csc
        s = slice(colptr[j], colptr[j + 1])
        return dict(zip(rows[s].tolist(), data[s].tolist()))

    def get(self, i: int, j: int) -> int:
        s = self._row_slice(i)
        cols = self.indices[s]
        pos = int(np.searchsorted(cols, j))
        if pos < len(cols) and cols[pos] == j:
            return int(self.data[s][pos])
        return 0

    def __getitem__(self, ij):
        return self.get(*ij)

    def items(self) -> Iterator[tuple[int, int, int]]:
        data = self.data.tolist()
        indices = self.indices.tolist()
        indptr = self.indptr.tolist()
        for i in range(self.n):
            for pos in range(indptr[i], indptr[i + 1]):
                yield i, indices[pos], data[pos]

    def values(self) -> list[int]:
        return self.data.tolist()

    def to_dict(self) -> dict[tuple[int, int], int]:
        return {(i, j): v for i, j, v in self.items()}

    def to_dense(self) -> list[list[int]]:
        out = [[0] * self.n for _ in range(self.n)]
        for i, j, v in self.items():
            out[i][j] = v
        return out


def _relation_primes(g: RelGraph, rel_primes: PathDict | None) -> PathDict:
    if rel_primes is None:
        return PathDict.for_relations(g.num_relations)
    missing = [r for r in range(g.num_relations) if (r,) not in rel_primes.forward]
    if missing:
        raise ContractError(f"relations {missing} have no prime")
    return rel_primes


def build_pam(
    g: RelGraph,
    mode: str = "sum",
    rel_primes: PathDict | None = None,
    bigint: bool = False,
) -> Pam:
    """One-hop PAM: cell (i, j) is the product (``mode="product"``) or sum
    (``mode="sum"``) of the primes of every relation from i to j."""
    if mode not in ("product", "sum"):
        raise ContractError("build_pam builds product or sum matrices")
    if g.num_edges == 0:
        raise EmptyGraphError("cannot build a PAM from an empty graph")
    rel_primes = _relation_primes(g, rel_primes)
    table = [rel_primes.forward[(r,)] for r in range(g.num_relations)]
    s, r, o = g.edges[:, 0], g.edges[:, 1], g.edges[:, 2]
    order = np.lexsort((r, o, s))
    s, r, o = s[order], r[order], o[order]
    key = s * g.num_nodes + o
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    ends = np.r_[starts[1:], len(key)]
    primes = [table[x] for x in r.tolist()]
    cells = {}
    for a, b in zip(starts.tolist(), ends.tolist()):
        group = primes[a:b]
        v = sum(group) if mode == "sum" else int(np.prod(group, dtype=object))
        i, j = int(s[a]), int(o[a])
        if v > UINT64_MAX and not bigint:
            raise CellOverflowError(i, j, k=1, value=v)
        cells[(i, j)] = v
    return Pam.from_cells(g.num_nodes, cells, k=1, mode=mode, rel_primes=rel_primes, bigint=bigint)


def _exact_cell(a_row: dict, b: Pam, j: int) -> int:
    col = b.col(j)
    return sum(int(v) * int(col[m]) for m, v in a_row.items() if m in col)


def _matmul_u64_block(A, Af, B, Bf):
    return A @ B, Af @ Bf


def _matmul_u64(a: Pam, b: Pam, k: int, mode: str, threads: int = 1) -> Pam:
    A, B = a.as_scipy(), b.as_scipy()
    Af, Bf = A.astype(np.float64), B.astype(np.float64)
    if threads > 1 and a.n > 1:
        bounds = np.linspace(0, a.n, threads + 1).astype(int)
        blocks = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda lh: _matmul_u64_block(A[lh[0] : lh[1]], Af[lh[0] : lh[1]], B, Bf), blocks))
        C = sp.vstack([c for c, _ in parts], format="csr")
        F = sp.vstack([f for _, f in parts], format="csr")
    else:
        C, F = A @ B, Af @ Bf
    C, F = sp.csr_array(C), sp.csr_array(F)
    C.sort_indices()
    F.sort_indices()
    if F.nnz and F.data.max() >= _SAFE_FLOAT:
        rows = np.repeat(np.arange(a.n), np.diff(F.indptr))
        for pos in np.flatnonzero(F.data >= _SAFE_FLOAT):
            i, j = int(rows[pos]), int(F.indices[pos])
            exact = _exact_cell(a.row(i), b, j)
            if exact > UINT64_MAX:
                raise CellOverflowError(i, j, k=k, value=exact)
    # with no overflow every cell is a positive sum, so patterns agree
    assert C.nnz == F.nnz
    return Pam(a.n, k, mode, C.indptr, C.indices, C.data.astype(np.uint64), a.rel_primes)


def _matmul_bigint(a: Pam, b: Pam, k: int, mode: str) -> Pam:
    b_rows = [b.row(m) for m in range(b.n)]
    indptr = [0]
    indices: list[int] = []
    values: list[int] = []
    for i in range(a.n):
        acc: dict[int, int] = {}
        for m, av in a.row(i).items():
            for j, bv in b_rows[m].items():
                acc[j] = acc.get(j, 0) + av * bv
        for j in sorted(acc):
            indices.append(j)
            values.append(acc[j])
        indptr.append(len(indices))
    return Pam(a.n, k, mode, indptr, indices, np.array(values, dtype=object), a.rel_primes)


def _as_bigint(p: Pam) -> Pam:
    if p.bigint:
        return p
    return Pam(p.n, p.k, p.mode, p.indptr, p.indices, np.array(p.data.tolist(), dtype=object), p.rel_primes)


def multiply(a: Pam, b: Pam, threads: int = 1) -> Pam:
    """``a x b`` under plus-times; the result's hop order is ``a.k + b.k``."""
    if a.n != b.n:
        raise ContractError("dimension mismatch")
    k = a.k + b.k
    if a.bigint or b.bigint:
        return _matmul_bigint(_as_bigint(a), _as_bigint(b), k, a.mode)
    return _matmul_u64(a, b, k, a.mode, threads)


def power(p: Pam, k_target: int, threads: int = 1) -> list[Pam]:
    """``[P^1, ..., P^k_target]`` by repeated one-hop extension."""
    if k_target < 1:
        raise ContractError("k_target must be >= 1")
    if p.k != 1:
        raise ContractError("power expects a one-hop matrix")
    if p.mode == "lossless":
        raise ContractError("use lossless.lossless_power for lossless matrices")
    out = [p]
    for _ in range(k_target - 1):
        out.append(multiply(out[-1], p, threads))
    return out


def histogram(p: Pam) -> dict[int, int]:
    """value -> number of nonzero cells holding it, ascending by value."""
    return dict(sorted(Counter(p.values()).items()))


def node_slices(p: Pam, node: int) -> tuple[dict[int, int], dict[int, int]]:
    if not 0 <= node < p.n:
        raise IndexError(f"node {node} outside 0..{p.n - 1}")
    return p.row(node), p.col(node)


def write_pam(p, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"%pam k={p.k} mode={p.mode} n={p.n}\n")
        for i, j, v in p.items():
            fh.write(f"{i} {j} {v}\n")


def read_pam(path: str | Path) -> Pam:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("%pam"):
        raise ContractError(f"{path}: missing %pam header")
    meta = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
    cells = {}
    for line in lines[1:]:
        if line:
            i, j, v = line.split()
            cells[(int(i), int(j))] = int(v)
    return Pam.from_cells(int(meta["n"]), cells, k=int(meta["k"]), mode=meta["mode"])


def write_histogram(hist: dict[int, int], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for v, c in sorted(hist.items()):
            fh.write(f"{v}\t{c}\n")
