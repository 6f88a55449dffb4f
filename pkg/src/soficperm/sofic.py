"""Quasi-actions by permutations, their defects, tiles and Folner sets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from . import _rng
from .groups import (CyclicGroup, Element, FreeGroup, GroupHandle, Integers, ZLattice,
                     group_from_descriptor)
from .perm import EMPTY, Permutation, compose, dist_to_identity, normalized_hamming


class DomainError(KeyError):
    pass


class UnsupportedGroup(TypeError):
    pass


def complete_partial(partial: Sequence[int], reverse_targets: bool = False) -> Permutation:
    """Extend a partial injection (``-1`` = undefined) to a permutation.

    Unmatched sources are sent to unmatched targets in ascending order
    (descending if ``reverse_targets``).
    """
    img = np.array(partial, dtype=np.int64)
    d = img.size
    hit = np.zeros(d, dtype=bool)
    hit[img[img != EMPTY]] = True
    sources = np.flatnonzero(img == EMPTY)
    targets = np.flatnonzero(~hit)
    if reverse_targets:
        targets = targets[::-1]
    img[sources] = targets
    return Permutation(img)


class QuasiAction:
    """A map from group elements to permutations of ``{0..degree-1}``.

    Given by a ``rule`` defined on the whole group, by a finite ``table``, or
    both (the table wins).  Values are cached; the object is otherwise immutable.
    """

    def __init__(self, group: GroupHandle, degree: int,
                 rule: Optional[Callable[[Element], Permutation]] = None,
                 table: Optional[dict] = None):
        if rule is None and table is None:
            raise ValueError("need a rule or a table")
        self.group = group
        self.degree = int(degree)
        self._rule = rule
        self._table = dict(table or {})
        for g, p in self._table.items():
            if p.degree != self.degree:
                raise ValueError(f"table entry for {g!r} has degree {p.degree}")
        self._cache: dict = {}

    def defined(self, g: Element) -> bool:
        return g in self._table or self._rule is not None

    def domain(self) -> list[Element]:
        if self._rule is not None:
            raise TypeError("rule-based quasi-action is defined on the whole group")
        return list(self._table)

    def __call__(self, g: Element) -> Permutation:
        if g in self._table:
            return self._table[g]
        if self._rule is None:
            raise DomainError(g)
        p = self._cache.get(g)
        if p is None:
            p = self._rule(g)
            if p.degree != self.degree:
                raise ValueError(f"rule gave degree {p.degree} for {g!r}")
            self._cache[g] = p
        return p

    def restricted(self, elements: Iterable[Element]) -> "QuasiAction":
        return QuasiAction(self.group, self.degree, table={g: self(g) for g in elements})

    def to_json(self, domain: Optional[Sequence[Element]] = None) -> dict:
        domain = list(domain) if domain is not None else self.domain()
        return {
            "group": self.group.descriptor(),
            "degree": self.degree,
            "domain": [self.group.to_json(g) for g in domain],
            "table": [self(g).to_json() for g in domain],
        }

    @classmethod
    def from_json(cls, data) -> "QuasiAction":
        if isinstance(data, str):
            data = json.loads(data)
        group = group_from_descriptor(data["group"])
        dom = [group.from_json(x) for x in data["domain"]]
        if len(dom) != len(data["table"]):
            raise ValueError("domain and table lengths differ")
        table = {g: Permutation(p) for g, p in zip(dom, data["table"])}
        degrees = {p.degree for p in table.values()}
        if len(degrees) != 1:
            raise ValueError("table permutations must share one degree")
        return cls(group, degrees.pop(), table=table)


@dataclass(frozen=True)
class DefectReport:
    """``multiplicativity_defect = max dist(phi(g1^-1 g2), phi(g1)^-1 phi(g2))`` over ``F x F``;
    ``freeness_defect = max (1 - dist(phi(g), id))`` over ``F \\ {e}``."""

    multiplicativity_defect: Fraction
    freeness_defect: Fraction

    @property
    def epsilon(self) -> Fraction:
        """Smallest ``eps`` making the map an ``(F, eps')``-quasi-action for every ``eps' > eps``."""
        return max(self.multiplicativity_defect, self.freeness_defect)

    def to_json(self) -> dict:
        return {
            "multiplicativity_defect": float(self.multiplicativity_defect),
            "freeness_defect": float(self.freeness_defect),
            "multiplicativity_defect_exact": str(self.multiplicativity_defect),
            "freeness_defect_exact": str(self.freeness_defect),
        }


def measure_defect(qa: QuasiAction, F: Sequence[Element]) -> DefectReport:
    G = qa.group
    F = list(dict.fromkeys(F))
    for g in F:
        if not qa.defined(g):
            raise DomainError(f"{g!r} is outside the quasi-action's domain")
    mult = Fraction(0)
    for g1 in F:
        inv1 = qa(g1).inverse()
        for g2 in F:
            h = G.multiply(G.inverse(g1), g2)
            if not qa.defined(h):
                raise DomainError(f"g1^-1 g2 = {h!r} is outside the domain")
            mult = max(mult, normalized_hamming(qa(h), compose(inv1, qa(g2))))
    free = max((1 - dist_to_identity(qa(g)) for g in F if g != G.identity), default=Fraction(0))
    return DefectReport(mult, free)


# -- standard actions ----------------------------------------------------------------


def regular_action(group: GroupHandle, copies: int = 1) -> QuasiAction:
    """Left translation of a finite group on ``copies`` disjoint copies of itself.

    Point ``i * copies + c`` is element ``i`` in copy ``c``.
    """
    if not group.is_finite:
        raise UnsupportedGroup("regular action needs a finite group")
    elems = group.elements()
    index = {g: i for i, g in enumerate(elems)}
    c = np.arange(copies)

    def rule(g):
        left = np.array([index[group.multiply(g, x)] for x in elems], dtype=np.int64)
        return Permutation((left[:, None] * copies + c[None, :]).ravel(), check=False)

    return QuasiAction(group, len(elems) * copies, rule=rule)


def truncated_shift_action(n: int, wrap: str = "reversed") -> QuasiAction:
    """``Z`` acting on ``{0..n-1}`` by ``k -> k + g`` where that stays in range.

    The ``|g|`` points that fall off are sent to the vacated points in
    ascending order (``wrap="cyclic"``, which is the translation action of
    ``Z/n``) or in descending order (``wrap="reversed"``).
    """
    if wrap not in ("cyclic", "reversed"):
        raise ValueError("wrap must be 'cyclic' or 'reversed'")
    ks = np.arange(n)

    def rule(g):
        tgt = ks + g
        partial = np.where((tgt >= 0) & (tgt < n), tgt, EMPTY)
        return complete_partial(partial, reverse_targets=(wrap == "reversed"))

    return QuasiAction(Integers(), n, rule=rule)


def free_group_action(rank: int, degree: int, seed: int) -> QuasiAction:
    """Free generators sent to seeded uniform permutations; words evaluated exactly.

    This is a homomorphism ``F_rank -> S_degree``, so its multiplicativity
    defect is 0; its freeness defect shrinks as ``degree`` grows.
    """
    rng = _rng.stream(seed, _rng.tag("free_group_action"), rank, degree)
    gens = [Permutation(_rng.uniform_permutation(rng, degree), check=False) for _ in range(rank)]
    inv = [g.inverse() for g in gens]

    def rule(w):
        out = np.arange(degree)
        for x in reversed(w):
            out = (gens[x - 1] if x > 0 else inv[-x - 1]).image[out]
        return Permutation(out, check=False)

    return QuasiAction(FreeGroup(rank), degree, rule=rule)


def translation_action(m: int) -> QuasiAction:
    """``Z/m`` acting on itself by translation."""
    return regular_action(CyclicGroup(m))


# -- Folner sets and tiles --------------------------------------------------------------


def _product_set(G: GroupHandle, A: Iterable[Element], B: Iterable[Element]) -> set:
    B = list(B)
    return {G.multiply(a, b) for a in A for b in B}


def folner_defect(G: GroupHandle, K: Sequence[Element], F: Sequence[Element]) -> Fraction:
    """``|KF \\ F| / |F|``."""
    F = set(F)
    if not F:
        raise ValueError("F must be nonempty")
    return Fraction(len(_product_set(G, K, F) - F), len(F))


Centers = Union[Sequence[Element], Callable[[Element], bool]]


@dataclass
class Tile:
    """Finite ``T`` (containing ``e``) whose right translates ``Tc``, ``c`` in
    the centers, partition the group.  ``centers`` is a finite list or a
    membership predicate (for infinite groups)."""

    group: GroupHandle
    tiles: list
    centers: Centers

    def __post_init__(self):
        self.tiles = list(dict.fromkeys(self.tiles))
        if self.group.identity not in self.tiles:
            raise ValueError("tile must contain the identity")

    def is_center(self, c: Element) -> bool:
        if callable(self.centers):
            return bool(self.centers(c))
        return c in set(self.centers)

    def centers_in(self, window: Iterable[Element]) -> list:
        return [c for c in dict.fromkeys(window) if self.is_center(c)]

    def boundary_ratio(self, K: Sequence[Element]) -> Fraction:
        """``|KT \\ T| / |T|``."""
        return folner_defect(self.group, K, self.tiles)

    @classmethod
    def interval(cls, length: int) -> "Tile":
        """``{0..L-1}`` in ``Z`` with centers ``LZ``."""
        return cls(Integers(), list(range(length)), lambda c: c % length == 0)

    @classmethod
    def whole(cls, group: GroupHandle) -> "Tile":
        return cls(group, group.elements(), [group.identity])


@dataclass(frozen=True)
class TileCheck:
    injective: bool
    covers: bool
    uncovered: tuple = ()

    def __bool__(self) -> bool:
        return self.injective and self.covers


def check_tile(tile: Tile, window_radius: int) -> TileCheck:
    if window_radius < 0:
        raise ValueError("window radius must be non-negative")
    G = tile.group
    window = G.ball(window_radius)
    inv_t = [G.inverse(t) for t in tile.tiles]
    cands = tile.centers_in(_product_set(G, inv_t, window))
    seen: set = set()
    injective = True
    for t in tile.tiles:
        for c in cands:
            x = G.multiply(t, c)
            injective &= x not in seen
            seen.add(x)
    uncovered = tuple(w for w in window if w not in seen)
    return TileCheck(injective, not uncovered, uncovered[:10])


def verify_tile(tile: Tile, window_radius: int) -> bool:
    return bool(check_tile(tile, window_radius))


@dataclass(frozen=True)
class FolnerSet:
    elements: list
    centers: list
    defect: Fraction


def _invariant_window(G: GroupHandle, constraints: list[tuple[list, Fraction]]) -> list:
    if G.is_finite:
        return G.elements()
    if not isinstance(G, (Integers, ZLattice)):
        raise UnsupportedGroup(f"no Folner sets implemented for {G!r}")
    L = 1
    while True:
        E = list(range(-L, L + 1)) if isinstance(G, Integers) else G.box(L)
        if all(folner_defect(G, K, E) < tol for K, tol in constraints):
            return E
        L *= 2


def tiled_folner(tile: Tile, K: Sequence[Element], eps) -> FolnerSet:
    """A ``(K, eps)``-invariant set ``F = T D`` with ``D`` a set of centers.

    Takes ``E`` invariant for ``T T^{-1}`` at level ``eps / 2|K|`` and for ``K``
    at level ``eps / 2``, then ``D = T^{-1} E`` intersected with the centers.
    """
    G = tile.group
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    K = list(dict.fromkeys(K))
    T = tile.tiles
    if eps > len(K) and tile.is_center(G.identity):
        D = [G.identity]
    else:
        TTinv = list(_product_set(G, T, [G.inverse(t) for t in T]))
        E = _invariant_window(G, [(TTinv, eps / (2 * max(len(K), 1))), (K, eps / 2)])
        D = tile.centers_in(_product_set(G, [G.inverse(t) for t in T], E))
    F = [G.multiply(t, c) for c in D for t in T]
    defect = folner_defect(G, K, F)
    if not defect < eps:
        raise AssertionError(f"Folner construction failed: defect {defect} >= {eps}")
    return FolnerSet(sorted(set(F), key=G.key), D, defect)


# -- witnesses ------------------------------------------------------------------------


@dataclass
class SoficWitness:
    degrees: list[int]
    targets: list
    defects: list[DefectReport]
    dist_to_identity: dict = field(default_factory=dict)
    trend_ok: bool = False

    def to_json(self, group: Optional[GroupHandle] = None) -> dict:
        fmt = group.to_json if group else (lambda g: g)
        return {
            "degrees": self.degrees,
            "defects": [r.to_json() for r in self.defects],
            "dist_to_identity": [{"element": fmt(g), "trajectory": [float(x) for x in traj]}
                                 for g, traj in self.dist_to_identity.items()],
            "trend_ok": self.trend_ok,
        }


def _nonincreasing(xs) -> bool:
    return all(b <= a for a, b in zip(xs, xs[1:]))


def assemble_witness(seq: Sequence[QuasiAction], targets: Sequence[Element],
                     tolerance=Fraction(1, 4)) -> SoficWitness:
    """Record defect and distance trajectories of a sequence of quasi-actions.

    ``trend_ok`` requires non-increasing multiplicativity defects, non-decreasing
    ``dist(psi_k(g), id)`` for each nontrivial target, and final values within
    ``tolerance`` of the limits (0 and 1).
    """
    if not seq:
        raise ValueError("empty sequence")
    G = seq[0].group
    F = list(dict.fromkeys([G.identity, *targets]))
    defects = [measure_defect(qa, F) for qa in seq]
    nontrivial = [g for g in targets if g != G.identity]
    dists = {g: [dist_to_identity(qa(g)) for qa in seq] for g in nontrivial}
    mult = [r.multiplicativity_defect for r in defects]
    ok = _nonincreasing(mult) and mult[-1] <= tolerance
    for traj in dists.values():
        ok = ok and _nonincreasing([-x for x in traj]) and traj[-1] >= 1 - tolerance
    return SoficWitness([qa.degree for qa in seq], list(targets), defects, dists, ok)
