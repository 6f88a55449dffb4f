"""Set partitions of ``{0, ..., m-1}`` and the pairings used in the moment bound.

A :class:`Partition` is stored as a restricted-growth string: ``block_id[k]``
is the block of point ``k``, blocks numbered in order of first appearance.
Equality of partitions is therefore equality of tuples.

The named pairings (``eta``, ``eta_prime``, ``gamma``) and the index maps
``f``/``g`` are written with 1-based points, exactly as in the usual
statement of the bound; :meth:`Partition.from_blocks` with
``one_based=True`` converts them at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

MAX_ENUMERATION = 12


class HypothesisViolation(ValueError):
    """A lemma was applied to a partition outside its hypothesis."""


def _canonical(labels: Sequence) -> tuple[int, ...]:
    relabel: dict = {}
    return tuple(relabel.setdefault(x, len(relabel)) for x in labels)


@dataclass(frozen=True)
class Partition:
    block_id: tuple[int, ...]

    def __post_init__(self):
        if tuple(self.block_id) != _canonical(self.block_id):
            raise ValueError(f"{self.block_id} is not a restricted-growth string")
        object.__setattr__(self, "block_id", tuple(self.block_id))

    @classmethod
    def from_labels(cls, labels: Sequence) -> "Partition":
        """Partition with ``k ~ l`` iff ``labels[k] == labels[l]``."""
        return cls(_canonical(labels))

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], m: int, one_based: bool = False) -> "Partition":
        shift = 1 if one_based else 0
        labels = [-1] * m
        for b, block in enumerate(blocks):
            for k in block:
                k -= shift
                if not 0 <= k < m or labels[k] != -1:
                    raise ValueError(f"blocks do not partition {m} points")
                labels[k] = b
        if -1 in labels:
            raise ValueError(f"blocks do not cover {m} points")
        return cls.from_labels(labels)

    @classmethod
    def singletons(cls, m: int) -> "Partition":
        return cls(tuple(range(m)))

    @classmethod
    def one_block(cls, m: int) -> "Partition":
        return cls((0,) * m)

    @property
    def ground_size(self) -> int:
        return len(self.block_id)

    def __len__(self) -> int:
        return max(self.block_id, default=-1) + 1

    def blocks(self, one_based: bool = False) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(len(self))]
        for k, b in enumerate(self.block_id):
            out[b].append(k + one_based)
        return out

    def same_block(self, k: int, l: int) -> bool:
        return self.block_id[k] == self.block_id[l]

    def __le__(self, other: "Partition") -> bool:
        """Refinement order: every block of ``self`` sits inside a block of ``other``."""
        _check_sizes(self, other)
        seen: dict[int, int] = {}
        return all(seen.setdefault(a, b) == b for a, b in zip(self.block_id, other.block_id))

    def restrict(self, points: Sequence[int]) -> "Partition":
        """Restriction to ``points``, renumbered ``0..len(points)-1`` in the given order."""
        return Partition.from_labels([self.block_id[k] for k in points])

    def __str__(self) -> str:
        return "{" + ", ".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks(True)) + "}"

    def to_json(self) -> list[int]:
        return list(self.block_id)

    @classmethod
    def from_json(cls, data: Sequence[int]) -> "Partition":
        return cls.from_labels(list(data))


def _check_sizes(a: Partition, b: Partition) -> None:
    if a.ground_size != b.ground_size:
        raise ValueError(f"ground sizes differ: {a.ground_size} vs {b.ground_size}")


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x: int, y: int) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        self.parent[max(rx, ry)] = min(rx, ry)
        return True


def join(a: Partition, b: Partition) -> Partition:
    _check_sizes(a, b)
    uf = _UnionFind(a.ground_size)
    for p in (a, b):
        first: dict[int, int] = {}
        for k, blk in enumerate(p.block_id):
            uf.union(first.setdefault(blk, k), k)
    return Partition.from_labels([uf.find(k) for k in range(a.ground_size)])


def meet(a: Partition, b: Partition) -> Partition:
    _check_sizes(a, b)
    return Partition.from_labels(list(zip(a.block_id, b.block_id)))


def enumerate_partitions(m: int) -> Iterator[Partition]:
    """All partitions of ``m`` points in restricted-growth-string order."""
    if m < 1:
        raise ValueError("m must be positive")
    if m > MAX_ENUMERATION:
        raise ValueError(f"m={m} exceeds the enumeration cap {MAX_ENUMERATION}")
    rgs = [0] * m
    maxes = [0] * m  # maxes[k] = max(rgs[:k+1])
    while True:
        yield Partition(tuple(rgs))
        k = m - 1
        while k > 0 and rgs[k] > maxes[k - 1]:
            k -= 1
        if k == 0:
            return
        rgs[k] += 1
        maxes[k] = max(maxes[k - 1], rgs[k])
        for j in range(k + 1, m):
            rgs[j] = 0
            maxes[j] = maxes[k]


def bell(m: int) -> int:
    """Bell number via the Bell triangle."""
    row = [1]
    for _ in range(m):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


# -- named pairings (1-based points) ------------------------------------------


def _need_n(n: int) -> None:
    if n < 1:
        raise ValueError("n must be at least 1")


def eta(n: int) -> Partition:
    """``{{1,2},{3,4},...,{2n-1,2n}}``."""
    _need_n(n)
    return Partition.from_blocks([(2 * j - 1, 2 * j) for j in range(1, n + 1)], 2 * n, one_based=True)


def eta_prime(n: int) -> Partition:
    """``{{2n,1},{2,3},{4,5},...,{2n-2,2n-1}}``."""
    _need_n(n)
    blocks = [(2 * n, 1)] + [(2 * j, 2 * j + 1) for j in range(1, n)]
    return Partition.from_blocks(blocks, 2 * n, one_based=True)


def gamma(n: int) -> Partition:
    """``{{1,2},{3,4},...,{4n-1,4n}}`` on ``4n`` points."""
    return eta(2 * n)


@dataclass(frozen=True)
class IndexMapPair:
    """The maps ``f, g : {1..2n} -> {1..4n}`` placing the row and column
    index of each Haar factor inside the ``4n``-tuple of matrix indices."""

    n: int
    f: tuple[int, ...]  # f[j-1] = f(j)
    g: tuple[int, ...]

    @classmethod
    def build(cls, n: int) -> "IndexMapPair":
        _need_n(n)
        f = tuple(2 * j if j % 2 else (2 * j + 1 if j < 2 * n else 1) for j in range(1, 2 * n + 1))
        g = tuple(2 * j + 1 if j % 2 else 2 * j for j in range(1, 2 * n + 1))
        maps = cls(n, f, g)
        maps._check_table()
        return maps

    def _check_table(self) -> None:
        n, f, g = self.n, self.f, self.g
        # leading columns: 1<-f(2n), 2<-f(1), 3<-g(1), 4<-g(2)
        assert (f[2 * n - 1], f[0], g[0], g[1]) == (1, 2, 3, 4)
        if n >= 2:
            assert (f[1], f[2], g[2], g[3]) == (5, 6, 7, 8)
            # trailing columns: f(2n-2), f(2n-1), g(2n-1), g(2n) -> 4n-3 .. 4n
            assert (f[2 * n - 3], f[2 * n - 2], g[2 * n - 2], g[2 * n - 1]) == (
                4 * n - 3, 4 * n - 2, 4 * n - 1, 4 * n)
        assert sorted(f + g) == list(range(1, 4 * n + 1))


def lift_p_of_r(r: Partition, maps: Optional[IndexMapPair] = None) -> Partition:
    """The partition of ``4n`` points whose blocks are ``f(X)`` and ``g(X)``
    for the blocks ``X`` of ``r``."""
    if r.ground_size % 2:
        raise ValueError("r must live on an even number of points")
    n = r.ground_size // 2
    maps = maps or IndexMapPair.build(n)
    if maps.n != n:
        raise ValueError(f"maps are for n={maps.n}, r has 2n={r.ground_size}")
    blocks = r.blocks(one_based=True)
    images = [[maps.f[j - 1] for j in X] for X in blocks] + [[maps.g[j - 1] for j in X] for X in blocks]
    return Partition.from_blocks(images, 4 * n, one_based=True)


# -- lemma checks -------------------------------------------------------------


def _half(r: Partition) -> int:
    if r.ground_size % 2 or r.ground_size == 0:
        raise ValueError("partition must live on 2n points")
    return r.ground_size // 2


def has_matched_pair(p: Partition) -> bool:
    """Whether ``2j-1 ~ 2j`` for some ``j`` (1-based)."""
    return any(p.same_block(2 * j, 2 * j + 1) for j in range(p.ground_size // 2))


def check_lemma22(r: Partition) -> bool:
    """``|r v eta| <= |r| / 2`` for ``r`` with no block containing ``{2j-1, 2j}``."""
    n = _half(r)
    if has_matched_pair(r):
        raise HypothesisViolation("some pair 2j-1, 2j lies in one block of r")
    return 2 * len(join(r, eta(n))) <= len(r)


def rnopair(r: Partition) -> bool:
    """No two cyclically adjacent points of ``{1..2n}`` share a block."""
    m = r.ground_size
    return not any(r.same_block(k, (k + 1) % m) for k in range(m))


@dataclass(frozen=True)
class RSCheck:
    rs1: bool
    rnopair_holds: bool
    rs0: Optional[bool]


def check_rs_inequalities(r: Partition) -> RSCheck:
    n = _half(r)
    total = len(join(r, eta_prime(n))) + len(join(r, eta(n)))
    nopair = rnopair(r)
    return RSCheck(
        rs1=total <= len(r) + 1,
        rnopair_holds=nopair,
        rs0=(total <= len(r)) if nopair else None,
    )


@dataclass
class LemmaSweep:
    two_n: int
    partitions: int = 0
    rs1_failures: int = 0
    rnopair_count: int = 0
    rs0_failures: int = 0
    half_join_applicable: int = 0
    half_join_failures: int = 0
    gamma_join_failures: int = 0

    @property
    def ok(self) -> bool:
        return not (self.rs1_failures or self.rs0_failures or self.half_join_failures
                    or self.gamma_join_failures)


def sweep_lemmas(two_n: int) -> LemmaSweep:
    """Exhaustively check the partition inequalities over all of ``P(2n)``.

    Also checks ``|p(r) v gamma| == |r v eta| + |r v eta'|``.
    """
    n = two_n // 2
    report = LemmaSweep(two_n)
    e, ep, gm, maps = eta(n), eta_prime(n), gamma(n), IndexMapPair.build(n)
    for r in enumerate_partitions(two_n):
        report.partitions += 1
        res = check_rs_inequalities(r)
        report.rs1_failures += not res.rs1
        if res.rnopair_holds:
            report.rnopair_count += 1
            report.rs0_failures += not res.rs0
        if not has_matched_pair(r):
            report.half_join_applicable += 1
            report.half_join_failures += not check_lemma22(r)
        lhs = len(join(lift_p_of_r(r, maps), gm))
        report.gamma_join_failures += lhs != len(join(r, e)) + len(join(r, ep))
    return report
