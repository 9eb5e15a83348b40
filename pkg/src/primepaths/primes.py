"""Prime generation and the prime <-> relation-chain dictionaries.

Relations (and k-hop relation chains) are named by primes so that any
multiset of them is encoded losslessly by the product of its primes.
"""

from __future__ import annotations

import math
from collections import Counter
from itertools import product as iproduct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, DecodeError, PrimeCapacityError

UINT64_MAX = 2**64 - 1

Chain = tuple[int, ...]


class _PrimeTable:
    """Sieve of Eratosthenes that grows by doubling its bound."""

    def __init__(self, bound=1024):
        self.bound = 0
        self.primes = np.empty(0, dtype=np.int64)
        self._extend(bound)

    def _extend(self, bound):
        sieve = np.ones(bound + 1, dtype=bool)
        sieve[:2] = False
        for p in range(2, math.isqrt(bound) + 1):
            if sieve[p]:
                sieve[p * p :: p] = False
        self.primes = np.flatnonzero(sieve).astype(np.int64)
        self.bound = bound

    def nth(self, n):
        """0-based: nth(0) == 2."""
        while n >= len(self.primes):
            self._extend(self.bound * 2)
        return int(self.primes[n])

    def index_of(self, p):
        while p > self.bound:
            self._extend(self.bound * 2)
        i = int(np.searchsorted(self.primes, p))
        if i >= len(self.primes) or self.primes[i] != p:
            raise ValueError(f"{p} is not prime")
        return i


_TABLE = _PrimeTable()


def nth_prime(n: int) -> int:
    """Return the n-th prime, counting from ``nth_prime(0) == 2``."""
    if n < 0:
        raise ContractError("prime index must be non-negative")
    return _TABLE.nth(n)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n <= _TABLE.bound:
        i = int(np.searchsorted(_TABLE.primes, n))
        return i < len(_TABLE.primes) and int(_TABLE.primes[i]) == n
    for p in (2, 3):
        if n % p == 0:
            return False
    i = 5
    while i * i <= n:
        if n % i == 0 or n % (i + 2) == 0:
            return False
        i += 6
    return True


class PrimeStream:
    """Issues consecutive primes, each exactly once.

    ``start`` is the smallest prime the stream may issue; ``max_prime`` is the
    integer width limit (primes are stored as unsigned 64-bit values).
    """

    def __init__(self, start: int = 2, max_prime: int = UINT64_MAX):
        if start < 2:
            raise ContractError("a prime stream starts at 2 or above")
        self.max_prime = max_prime
        self.generated: list[int] = []
        self._offset = _TABLE.index_of(start) if is_prime(start) else self._first_index_above(start)

    @staticmethod
    def _first_index_above(start):
        i = 0
        while nth_prime(i) < start:
            i += 1
        return i

    @property
    def cursor(self) -> int:
        return len(self.generated)

    def next_prime(self) -> int:
        p = nth_prime(self._offset + len(self.generated))
        if p > self.max_prime:
            raise PrimeCapacityError(f"prime {p} exceeds the configured width limit {self.max_prime}")
        self.generated.append(p)
        return p


def next_prime(stream: PrimeStream) -> int:
    return stream.next_prime()


class PathDict:
    """Bijection between k-hop relation chains and primes (phi_k and its inverse).

    ``order="encounter"`` binds the next prime of a stream to each unseen chain.
    ``order="lexicographic"`` gives the chain with base-|R| rank ``n`` the
    prime ``nth_prime(n + offset)``, i.e. chains are numbered as if every one of
    the |R|^k chains had been listed in order, but only realized chains are
    stored.
    """

    def __init__(
        self,
        k: int,
        order: str = "encounter",
        num_relations: int | None = None,
        offset: int = 0,
    ):
        if k < 1:
            raise ContractError("hop order k must be positive")
        if order not in ("encounter", "lexicographic"):
            raise ContractError(f"unknown prime order {order!r}")
        if order == "lexicographic" and not num_relations:
            raise ContractError("lexicographic order needs num_relations")
        self.k = k
        self.order = order
        self.num_relations = num_relations
        self.offset = offset
        self.forward: dict[Chain, int] = {}
        self.inverse: dict[int, Chain] = {}
        self._sorted_primes: list[int] | None = None

    def __len__(self):
        return len(self.forward)

    def __contains__(self, path):
        return tuple(path) in self.forward

    def __eq__(self, other):
        return (
            isinstance(other, PathDict)
            and self.k == other.k
            and self.forward == other.forward
        )

    def __repr__(self):
        return f"PathDict(k={self.k}, order={self.order!r}, size={len(self)})"

    @classmethod
    def for_relations(cls, num_relations: int, start: int = 3) -> "PathDict":
        """phi_1 over relation indices 0..R-1, consecutive primes from ``start``."""
        d = cls(1)
        stream = PrimeStream(start=start)
        for r in range(num_relations):
            d.assign((r,), stream)
        return d

    @classmethod
    def from_mapping(cls, mapping: dict[Chain, int]) -> "PathDict":
        k = {len(c) for c in mapping}
        if len(k) != 1:
            raise ContractError("all chains in one PathDict must share a length")
        d = cls(k.pop())
        for chain, p in mapping.items():
            d._bind(tuple(chain), int(p))
        return d

    def rank(self, path: Chain) -> int:
        r = 0
        for rel in path:
            if not 0 <= rel < self.num_relations:
                raise ContractError(f"relation {rel} outside 0..{self.num_relations - 1}")
            r = r * self.num_relations + rel
        return r

    def _bind(self, path, p):
        if p in self.inverse and self.inverse[p] != path:
            raise ContractError(f"prime {p} already bound to {self.inverse[p]}")
        self.forward[path] = p
        self.inverse[p] = path
        self._sorted_primes = None

    def assign(self, path: Sequence[int], stream: PrimeStream | None = None) -> int:
        path = tuple(path)
        if len(path) != self.k:
            raise ContractError(f"path {path} has length {len(path)}, dictionary holds k={self.k}")
        p = self.forward.get(path)
        if p is not None:
            return p
        if self.order == "lexicographic":
            p = nth_prime(self.rank(path) + self.offset)
            if stream is not None and p > stream.max_prime:
                raise PrimeCapacityError(f"prime {p} exceeds the configured width limit")
        else:
            if stream is None:
                raise ContractError("encounter-ordered dictionaries need a PrimeStream")
            p = stream.next_prime()
        self._bind(path, p)
        return p

    def primes(self) -> list[int]:
        if self._sorted_primes is None:
            self._sorted_primes = sorted(self.inverse)
        return self._sorted_primes

    def factor_counts(self, value: int) -> Counter:
        """Factorize ``value`` over this dictionary's primes: prime -> exponent."""
        if value < 2:
            raise ContractError(f"cannot decode {value}: value must be >= 2")
        counts = Counter()
        rest = value
        for p in self.primes():
            if p * p > rest and rest in self.inverse:
                counts[rest] += 1
                rest = 1
            if rest == 1:
                break
            while rest % p == 0:
                rest //= p
                counts[p] += 1
        if rest != 1:
            raise DecodeError(value, smallest_factor(rest))
        return counts

    def decode(self, value: int) -> Counter:
        """Multiset of chains (chain -> multiplicity) encoded by ``value``."""
        return Counter({self.inverse[p]: m for p, m in self.factor_counts(value).items()})

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def dumps(self) -> str:
        head = f"%pathdict k={self.k} order={self.order}"
        if self.order == "lexicographic":
            head += f" num_relations={self.num_relations} offset={self.offset}"
        lines = [head]
        for p in self.primes():
            lines.append(f"{p}\t{','.join(map(str, self.inverse[p]))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PathDict":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("%pathdict"):
            raise ContractError("missing %pathdict header")
        meta = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
        d = cls(
            int(meta["k"]),
            order=meta.get("order", "encounter"),
            num_relations=int(meta["num_relations"]) if "num_relations" in meta else None,
            offset=int(meta.get("offset", 0)),
        )
        for line in lines[1:]:
            if not line:
                continue
            p, rels = line.split("\t")
            chain = tuple(int(x) for x in rels.split(","))
            if len(chain) != d.k:
                raise ContractError(f"chain {chain} does not have length {d.k}")
            d._bind(chain, int(p))
        return d

    @classmethod
    def read(cls, path: str | Path) -> "PathDict":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def assign_path(d: PathDict, path: Sequence[int], stream: PrimeStream | None = None) -> int:
    return d.assign(path, stream)


def decode(d: PathDict, value: int) -> Counter:
    return d.decode(value)


def encode_multiset(d: PathDict, paths: Iterable[Chain], stream: PrimeStream | None = None) -> int:
    value = 1
    for path in paths:
        value *= d.assign(path, stream)
    return value


def smallest_factor(n: int, limit: int = 10**6) -> int:
    """Smallest prime factor of ``n`` if below ``limit``, else ``n`` itself."""
    if n % 2 == 0:
        return 2
    i = 3
    while i * i <= n and i < limit:
        if n % i == 0:
            return i
        i += 2
    return n


def factorize(n: int, known: Iterable[int] = (), limit: int = 10**6) -> list[int]:
    """Prime factors of ``n`` in ascending order, with multiplicity.

    ``known`` primes are tried first; the cofactor is trial-divided up to
    ``limit`` and any remainder beyond that is reported as a single factor.
    """
    factors = []
    rest = n
    for p in sorted(known):
        while rest % p == 0 and rest > 1:
            rest //= p
            factors.append(p)
    while rest > 1:
        f = smallest_factor(rest, limit)
        factors.append(f)
        rest //= f
    return sorted(factors)


def all_chains(num_relations: int, k: int) -> Iterable[Chain]:
    return iproduct(range(num_relations), repeat=k)
