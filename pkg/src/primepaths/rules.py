"""Horn rules ``Path^k(X, Y) -> r_H(X, Y)`` mined by joint look-ups in P^k and P."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import ContractError
from .lossless import LosslessPam
from .pam import Pam
from .primes import Chain, PathDict


@dataclass(frozen=True)
class Rule:
    body_value: int
    head: int
    support: int
    body_count: int
    body_chain: Chain | None = None
    lossy: bool = True

    @property
    def confidence(self) -> float:
        return self.support / self.body_count


def _head_primes(value: int, rel_primes: PathDict) -> list[int]:
    return [p for p in rel_primes.primes() if value % p == 0]


def mine_rules(
    p1: Pam | LosslessPam,
    pk: Pam | LosslessPam,
    min_support: int = 1,
    min_confidence: float = 0.0,
    rel_primes: PathDict | None = None,
) -> list[Rule]:
    """All rules whose support and confidence reach the thresholds.

    ``p1`` must be the one-hop product-mode matrix (head membership is a
    divisibility test). A lossy ``pk`` groups bodies by raw cell value; a
    :class:`LosslessPam` ``pk`` yields one body per decoded chain, counted once
    per node pair.
    """
    if p1.k != 1:
        raise ContractError("p1 must be the one-hop matrix")
    if p1.mode not in ("product", "lossless"):
        raise ContractError("p1 must be product-mode so heads can be tested by divisibility")
    if p1.n != pk.n:
        raise ContractError(f"dimension mismatch: {p1.n} vs {pk.n}")
    rel_primes = rel_primes or getattr(p1, "rel_primes", None) or getattr(p1, "path_dict", None)
    if rel_primes is None:
        raise ContractError("relation primes are needed to enumerate heads")
    lossless = isinstance(pk, LosslessPam)
    body_count: Counter = Counter()
    support: dict[tuple[int, int], int] = defaultdict(int)
    for i, j, v in pk.items():
        bodies = sorted(pk.rows[i][j]) if lossless else [v]
        body_count.update(bodies)
        head_cell = p1.get(i, j)
        if not head_cell:
            continue
        heads = _head_primes(head_cell, rel_primes)
        for b in bodies:
            for h in heads:
                support[(b, h)] += 1
    rules = []
    for (b, h), s in support.items():
        n = body_count[b]
        if s >= min_support and s / n >= min_confidence:
            chain = pk.path_dict.inverse[b] if lossless else None
            rules.append(Rule(b, h, s, n, chain, not lossless))
    rules.sort(key=lambda r: (-r.confidence, -r.support, r.body_value, r.head))
    return rules


def write_rules(
    rules: Sequence[Rule],
    path: str | Path,
    rel_primes: PathDict,
    relation_labels: Sequence[str],
) -> None:
    """``body_value body_chain_or_UNKNOWN head_relation support body_count confidence``."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("body_value\tbody_chain\thead_relation\tsupport\tbody_count\tconfidence\n")
        for r in rules:
            chain = ",".join(relation_labels[x] for x in r.body_chain) if r.body_chain else "UNKNOWN"
            head = relation_labels[rel_primes.inverse[r.head][0]]
            fh.write(f"{r.body_value}\t{chain}\t{head}\t{r.support}\t{r.body_count}\t{r.confidence!r}\n")
