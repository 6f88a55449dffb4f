"""Quasi-actions of amalgamated free products ``G1 *_H G2``.

Pipeline:

1. :func:`align_to_tile` moves a quasi-action of ``G_i`` onto the point set
   ``T x Z`` (``T`` a tile of ``H``) so that elements ``h`` of a finite
   ``K`` inside ``H`` act exactly as ``rho_h x id``, with ``rho_h(t) = ht``.
   Point ``(t, z)`` has index ``t * |Z| + z``.
2. :func:`amplify` tensors with the identity on an extra factor of ``Z``.
3. :func:`extract_blocks` splits a permutation of ``T x Z`` into the
   ``|T|^2`` sub-permutation blocks of size ``|Z|``.
4. :func:`build_amalgam` draws a conjugator ``V = 1 (x) U``, ``U`` uniform on
   ``Sym(Z)``, and evaluates words as ``psi_1(g) = phi_1(g)`` and
   ``psi_2(g) = V phi_2(g) V^{-1}``.
5. :func:`certify_vanishing` estimates ``E tr(psi(g_1) ... psi(g_{2n}))`` for
   alternating words and compares it with the moment bound taken block by block.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _rng
from .groups import (Element, Embedding, GroupHandle, Integers,
                     group_from_descriptor)
from .moments import MomentSpec, bound_constant, exact_moment
from .perm import EMPTY, Permutation, SubPermMatrix, dist_to_identity
from .sofic import (QuasiAction, Tile, UnsupportedGroup, complete_partial, folner_defect,
                    free_group_action, measure_defect, regular_action, truncated_shift_action)

DERANDOMIZE_MAX_Z = 6

Syllable = tuple  # (factor index 1 or 2, element of that factor)


class AlignmentError(ValueError):
    """Quasi-actions that cannot be put on a common tile structure."""


class WordError(ValueError):
    """A word outside an operation's hypotheses."""


# -- alignment --------------------------------------------------------------------


@dataclass
class TileAlignedQA:
    """A quasi-action of ``G_i`` on ``T x Z`` with ``K`` acting as ``rho x id``.

    ``delta`` is the fraction of ``T x Z`` not covered by aligned tile copies;
    ``source_epsilon`` the defect of the input quasi-action on ``test_set``.
    """

    base: QuasiAction
    tile: Tile
    embedding: Embedding
    K: list
    z_size: int
    rho: dict
    copies: int
    delta: Fraction
    source_epsilon: Fraction
    tiling_penalty: Fraction
    test_set: list = field(default_factory=list)

    @property
    def group(self) -> GroupHandle:
        return self.base.group

    @property
    def tile_size(self) -> int:
        return len(self.tile.tiles)

    @property
    def degree(self) -> int:
        return self.base.degree

    @property
    def formula_budget(self) -> Fraction:
        """``eps + 6 delta / (1 - delta) + 6 |KT \\ T| / |T|``."""
        return (self.source_epsilon + 6 * self.delta / (1 - self.delta)
                + 6 * self.tiling_penalty)

    def in_subgroup(self, g: Element) -> bool:
        return self.embedding.contains_image(g)

    def __call__(self, g: Element) -> Permutation:
        return self.base(g)

    def measured_epsilon(self, F: Optional[Sequence[Element]] = None) -> Fraction:
        return measure_defect(self.base, F if F is not None else self.test_set).epsilon

    def summary(self) -> dict:
        return {
            "tile_size": self.tile_size,
            "z_size": self.z_size,
            "copies": self.copies,
            "delta": float(self.delta),
            "source_epsilon": float(self.source_epsilon),
            "tiling_penalty": float(self.tiling_penalty),
            "formula_budget": float(self.formula_budget),
            "measured_epsilon": float(self.measured_epsilon()),
        }


def _tile_rho(tile: Tile, h: Element) -> Permutation:
    G = tile.group
    index = {t: i for i, t in enumerate(tile.tiles)}
    partial = [index.get(G.multiply(h, t), EMPTY) for t in tile.tiles]
    return complete_partial(partial)


def _rho_times_id(rho: Permutation, z: int) -> Permutation:
    return Permutation((rho.image[:, None] * z + np.arange(z)[None, :]).ravel(), check=False)


def _check_subgroup(tile: Tile, embedding: Embedding) -> None:
    H = tile.group
    if H != embedding.source:
        raise AlignmentError("tile and embedding live on different subgroups")
    if not (H.is_finite or isinstance(H, Integers)):
        raise UnsupportedGroup("alignment needs a finite subgroup or Z with an interval tile")


def align_to_tile(qa: QuasiAction, tile: Tile, embedding: Embedding, K: Sequence[Element],
                  test_set: Optional[Sequence[Element]] = None) -> TileAlignedQA:
    """Greedy alignment of ``qa`` to ``T x Z``.

    A point ``x`` starts a tile copy ``{phi_t(x)}`` when these points are
    distinct, still free, and ``phi_h`` maps the copy of ``t`` to the copy of
    ``ht`` for each ``h`` in ``K`` with ``ht`` in ``T``.  Points left over
    fill extra ``Z`` slots; unused slots are padding, fixed by every element.
    ``phi_h`` for ``h`` in ``K`` is then replaced by ``rho_h x id``.
    """
    _check_subgroup(tile, embedding)
    G, H = qa.group, tile.group
    if embedding.target != G:
        raise AlignmentError("embedding target differs from the acting group")
    K = list(dict.fromkeys(K))
    T = tile.tiles
    tidx = {t: i for i, t in enumerate(T)}
    n = qa.degree
    tile_perms = [qa(embedding(t)).image for t in T]
    checks = [(qa(embedding(h)).image, [(i, tidx[H.multiply(h, t)]) for i, t in enumerate(T)
                                        if H.multiply(h, t) in tidx]) for h in K]

    free = np.ones(n, dtype=bool)
    alpha = np.full(n, EMPTY, dtype=np.int64)
    copies: list[np.ndarray] = []
    for x in range(n):
        if not free[x]:
            continue
        pts = np.array([p[x] for p in tile_perms], dtype=np.int64)
        if len(set(pts.tolist())) != len(T) or not free[pts].all():
            continue
        if any(hp[pts[i]] != pts[j] for hp, pairs in checks for i, j in pairs):
            continue
        free[pts] = False
        copies.append(pts)
    c = len(copies)
    if c == 0:
        raise AlignmentError("no tile copy is consistent with the quasi-action")
    leftovers = np.flatnonzero(free)
    z = c + -(-leftovers.size // len(T))
    for k, pts in enumerate(copies):
        alpha[pts] = np.arange(len(T)) * z + k
    extra = [t * z + k for k in range(c, z) for t in range(len(T))]
    alpha[leftovers] = extra[: leftovers.size]
    size = len(T) * z

    F = list(test_set) if test_set is not None else list(dict.fromkeys(
        [embedding(h) for h in K] + G.ball(1)))
    eps = measure_defect(qa, F).epsilon
    rho = {h: _tile_rho(tile, h) for h in K}
    overrides = {embedding(h): _rho_times_id(rho[h], z) for h in K}

    def rule(g):
        if g in overrides:
            return overrides[g]
        partial = np.full(size, EMPTY, dtype=np.int64)
        partial[alpha] = alpha[qa(g).image]
        return complete_partial(partial)

    base = QuasiAction(G, size, rule=rule)
    return TileAlignedQA(base, tile, embedding, K, z, rho, c, Fraction(size - c * len(T), size),
                         eps, folner_defect(H, K, T) if K else Fraction(0), F)


def amplify(aq: TileAlignedQA, factor: int) -> TileAlignedQA:
    """``phi (x) id`` on ``T x (Z x {0..factor-1})``; index ``old * factor + j``."""
    if factor < 1:
        raise ValueError("factor must be positive")
    if factor == 1:
        return aq
    j = np.arange(factor)
    old = aq.base

    def rule(g):
        return Permutation((old(g).image[:, None] * factor + j[None, :]).ravel(), check=False)

    base = QuasiAction(old.group, old.degree * factor, rule=rule)
    return TileAlignedQA(base, aq.tile, aq.embedding, aq.K, aq.z_size * factor, aq.rho,
                         aq.copies * factor, aq.delta, aq.source_epsilon, aq.tiling_penalty,
                         aq.test_set)


def amplify_to(aq: TileAlignedQA, z_size: int) -> TileAlignedQA:
    if z_size % aq.z_size:
        raise AlignmentError(f"|Z| = {aq.z_size} does not divide the target {z_size}")
    return amplify(aq, z_size // aq.z_size)


# -- blocks -----------------------------------------------------------------------


@dataclass(frozen=True)
class BlockDecomposition:
    """``table[t, t', z'] = z`` when the permutation sends ``(t', z')`` to ``(t, z)``, else -1."""

    element: Element
    z_size: int
    table: np.ndarray

    @property
    def tile_size(self) -> int:
        return self.table.shape[0]

    def block(self, t: int, t_prime: int) -> SubPermMatrix:
        return SubPermMatrix(self.z_size, self.table[t, t_prime], check=False)

    def reassemble(self) -> Permutation:
        T, Z = self.tile_size, self.z_size
        image = np.full(T * Z, EMPTY, dtype=np.int64)
        t, tp, zp = np.nonzero(self.table != EMPTY)
        image[tp * Z + zp] = t * Z + self.table[t, tp, zp]
        return Permutation(image)

    def block_traces(self) -> np.ndarray:
        """Diagonal counts of every block, shape ``(T, T)``."""
        return (self.table == np.arange(self.z_size)).sum(axis=-1)

    def max_block_trace(self) -> Fraction:
        return Fraction(int(self.block_traces().max()), self.z_size)


def extract_blocks(aq: TileAlignedQA, g: Element) -> BlockDecomposition:
    T, Z = aq.tile_size, aq.z_size
    sigma = aq(g).image
    cols = np.arange(T * Z)
    table = np.full((T, T, Z), EMPTY, dtype=np.int64)
    table[sigma // Z, cols // Z, cols % Z] = sigma % Z
    return BlockDecomposition(g, Z, table)


def block_trace_bound(aq: TileAlignedQA) -> Fraction:
    """``2 eta |T|`` with ``eta`` the formula budget."""
    return 2 * aq.formula_budget * aq.tile_size


# -- the amalgam ------------------------------------------------------------------


def _check_pair(aq1: TileAlignedQA, aq2: TileAlignedQA) -> None:
    if aq1.tile.tiles != aq2.tile.tiles or aq1.tile.group != aq2.tile.group:
        raise AlignmentError("factors are aligned to different tiles")
    if aq1.z_size != aq2.z_size:
        raise AlignmentError(f"factors have different |Z| ({aq1.z_size} vs {aq2.z_size})")
    if set(aq1.K) != set(aq2.K):
        raise AlignmentError("factors use different K")
    for h in aq1.K:
        if aq1(aq1.embedding(h)) != aq2(aq2.embedding(h)):
            raise AlignmentError(f"factors disagree on {h!r}")


def _conjugator(aq: TileAlignedQA, u: np.ndarray) -> Permutation:
    Z = aq.z_size
    t = np.arange(aq.tile_size)[:, None] * Z
    return Permutation((t + np.asarray(u)[None, :]).ravel(), check=False)


def _apply_chain(perms: Sequence[np.ndarray], degree: int) -> np.ndarray:
    """Image array of ``perms[0] perms[1] ... perms[-1]`` (rightmost acts first)."""
    out = np.arange(degree)
    for p in reversed(perms):
        out = p[out]
    return out


class AmalgamQA:
    """Word evaluator for ``G1 *_H G2`` on ``T x Z`` with one conjugator ``V = 1 (x) U``.

    Syllable images are symmetrized: ``psi(g^{-1}) = psi(g)^{-1}`` exactly,
    with the smaller of ``g, g^{-1}`` (group key order) evaluated directly.
    """

    def __init__(self, aq1: TileAlignedQA, aq2: TileAlignedQA, u: Sequence[int], label: str = ""):
        _check_pair(aq1, aq2)
        self.factors = (aq1, aq2)
        self.u = np.asarray(u, dtype=np.int64)
        if sorted(self.u.tolist()) != list(range(aq1.z_size)):
            raise ValueError("conjugator must be a permutation of Z")
        self.V = _conjugator(aq1, self.u)
        self.V_inv = self.V.inverse()
        self.label = label
        self._cache: dict = {}

    @property
    def degree(self) -> int:
        return self.factors[0].degree

    def params(self) -> dict:
        a = self.factors[0]
        return {"tile_size": a.tile_size, "z_size": a.z_size,
                "eta": float(max(f.formula_budget for f in self.factors)), "seed": self.label}

    def group(self, i: int) -> GroupHandle:
        return self.factors[i - 1].group

    def subgroup_element(self, i: int, g: Element):
        """Source element of ``H`` mapping to ``g`` in factor ``i``, or None."""
        return self.factors[i - 1].embedding.preimage(g)

    def _raw(self, i: int, g: Element) -> Permutation:
        p = self.factors[i - 1](g)
        if i == 2:
            p = Permutation(self.V.image[p.image[self.V_inv.image]], check=False)
        return p

    def syllable(self, i: int, g: Element) -> Permutation:
        key = (i, g)
        if key not in self._cache:
            G = self.group(i)
            inv = G.inverse(g)
            canon = min(g, inv, key=G.key)
            p = self._raw(i, canon)
            self._cache[key] = p if g == canon else p.inverse()
        return self._cache[key]

    def reduce(self, word: Sequence[Syllable]) -> tuple:
        return reduce_word(word, self.group, self.subgroup_element, self._to_factor)

    def _to_factor(self, j: int, h) -> Element:
        return self.factors[j - 1].embedding(h)

    def evaluate(self, word: Sequence[Syllable]) -> Permutation:
        """Product of syllable images of the reduced word."""
        w = self.reduce(word)
        img = _apply_chain([self.syllable(i, g).image for i, g in w], self.degree)
        return Permutation(img, check=False)

    def classify(self, word: Sequence[Syllable]) -> "WordCase":
        return classify_word(self.reduce(word), self)

    def psi(self, word: Sequence[Syllable]) -> Permutation:
        """``psi(w)``; words of case (d) go through ``psi(f) psi(g') psi(f)^{-1}``."""
        case = self.classify(word)
        core = self.evaluate(case.core)
        if not case.conjugator:
            return core
        f = self.evaluate(case.conjugator)
        return f * core * f.inverse()


def reduce_word(word, group_of, preimage, embed) -> tuple:
    """Reduced form: adjacent syllables from one factor merged, identities dropped,
    subgroup syllables moved across and merged into a neighbour."""
    w = [(int(i), g) for i, g in word]
    for i, _ in w:
        if i not in (1, 2):
            raise WordError(f"factor index must be 1 or 2, got {i}")
    changed = True
    while changed:
        changed = False
        out: list = []
        for i, g in w:
            if g == group_of(i).identity:
                changed = True
                continue
            if out and out[-1][0] == i:
                out[-1] = (i, group_of(i).multiply(out[-1][1], g))
                changed = True
                continue
            out.append((i, g))
        w = out
        if len(w) > 1:
            for k, (i, g) in enumerate(w):
                h = preimage(i, g)
                if h is not None:
                    j = 3 - i
                    w[k] = (j, embed(j, h))
                    changed = True
                    break
    return tuple(w)


@dataclass(frozen=True)
class WordCase:
    """``tag``: ``a`` single factor-1 or subgroup syllable, ``b`` single factor-2
    syllable, ``c`` even alternating word starting in factor 1, ``d`` a conjugate
    ``f g' f^{-1}`` of one of the others (``core`` = ``g'``, ``conjugator`` = ``f``)."""

    tag: str
    core: tuple
    conjugator: tuple = ()


def _base_case(w: tuple, amalgam) -> Optional[str]:
    if len(w) == 1:
        i, g = w[0]
        return "a" if i == 1 or amalgam.subgroup_element(i, g) is not None else "b"
    if len(w) % 2 == 0 and w[0][0] == 1:
        return "c"
    return None


def classify_word(w: tuple, amalgam) -> WordCase:
    if not w:
        raise WordError("the trivial word has no case")
    tag = _base_case(w, amalgam)
    if tag:
        return WordCase(tag, w)
    f: list = []
    core = w
    while _base_case(core, amalgam) is None:
        first = core[0]
        f.append(first)
        core = amalgam.reduce(core[1:] + (first,))
        if not core:
            raise WordError("word is trivial")
    return WordCase("d", core, amalgam.reduce(tuple(f)))


def build_amalgam(aq1: TileAlignedQA, aq2: TileAlignedQA, seed: int, index: int = 0) -> AmalgamQA:
    """One sampled conjugator per ``(seed, index)``."""
    z = aq1.z_size
    path = (_rng.tag("amalgam_conjugator"), z, index)
    u = _rng.uniform_permutation(_rng.stream(seed, *path), z)
    return AmalgamQA(aq1, aq2, u, _rng.seed_label(seed, *path))


def derandomized_psi(aq1: TileAlignedQA, aq2: TileAlignedQA, word) -> Permutation:
    """``psi(w)`` for the conjugator ``(+)_U 1 (x) U`` over all ``U`` in ``Sym(Z)``:
    a block-diagonal permutation of degree ``|T| |Z| |Z|!``."""
    z = aq1.z_size
    if z > DERANDOMIZE_MAX_Z:
        raise ValueError(f"|Z| = {z} exceeds the derandomization limit {DERANDOMIZE_MAX_Z}")
    parts = []
    for k, u in enumerate(itertools.permutations(range(z))):
        a = AmalgamQA(aq1, aq2, u)
        parts.append(a.evaluate(word).image + k * a.degree)
    return Permutation(np.concatenate(parts))


# -- word distance ------------------------------------------------------------------


@dataclass(frozen=True)
class WordDistance:
    word: tuple
    case: str
    dists: tuple
    direct_dists: tuple
    labels: tuple

    @property
    def mean_dist(self) -> float:
        return float(np.mean([float(x) for x in self.dists]))

    @property
    def std_error(self) -> float:
        return _rng.mean_and_stderr([float(x) for x in self.dists])[1]


def check_word_distance(amalgams: Sequence[AmalgamQA], word) -> WordDistance:
    """``dist(psi(w), id)`` for each sampled amalgam, plus the directly evaluated product."""
    if not amalgams:
        raise ValueError("need at least one amalgam")
    w = amalgams[0].reduce(word)
    case = amalgams[0].classify(w)
    dists, direct = [], []
    for a in amalgams:
        dists.append(dist_to_identity(a.psi(w)))
        direct.append(dist_to_identity(a.evaluate(w)))
    return WordDistance(w, case.tag, tuple(dists), tuple(direct), tuple(a.label for a in amalgams))


# -- vanishing ----------------------------------------------------------------------


@dataclass
class VanishingReport:
    word: tuple
    z_size: int
    tile_size: int
    n: int
    estimate: float
    std_error: float
    samples: int
    ceiling: float
    formula_ceiling: float
    block_trace: Fraction
    seed_label: str
    exact: Optional[Fraction] = None

    def ok(self, sigmas: float = 4.0) -> bool:
        return self.estimate <= self.ceiling + sigmas * self.std_error


def _check_alternating(aq1: TileAlignedQA, aq2: TileAlignedQA, word: Sequence[Element]) -> None:
    if not word or len(word) % 2:
        raise WordError("need an alternating word g1 g2 ... g_2n of even length")
    for k, g in enumerate(word):
        aq = aq1 if k % 2 == 0 else aq2
        if not aq.group.contains(g):
            raise WordError(f"{g!r} is not an element of factor {k % 2 + 1}")
        if aq.in_subgroup(g):
            raise WordError(f"g_{k + 1} = {g!r} lies in the amalgamated subgroup")


def block_moment_exact(aq1: TileAlignedQA, aq2: TileAlignedQA, word: Sequence[Element],
                       budget: Optional[int] = None) -> Fraction:
    """``(1/|T|) sum_{t_1..t_2n} E tr_Z(B_{g1,t1,t2} U B_{g2,t2,t3} U* ...)`` via exact moments."""
    T = aq1.tile_size
    decomp = [extract_blocks(aq1 if k % 2 == 0 else aq2, g) for k, g in enumerate(word)]
    m = len(word)
    total = Fraction(0)
    for ts in itertools.product(range(T), repeat=m):
        blocks = [decomp[k].block(ts[k], ts[(k + 1) % m]) for k in range(m)]
        if any(b.nnz == 0 for b in blocks):
            continue
        total += exact_moment(MomentSpec(tuple(blocks)), budget)
    return total / T


def certify_vanishing(aq1: TileAlignedQA, aq2: TileAlignedQA, words: Sequence[Sequence[Element]],
                      samples: int, seed: int, workers: int = 1,
                      exact: bool = False) -> list[VanishingReport]:
    """Monte Carlo ``E tr(phi1(g1) V phi2(g2) V* ...)`` over ``V = 1 (x) U``.

    The ceiling is ``|T|^{2n-1} (C_n f + D_n / |Z|)`` with ``f`` the largest
    normalized block trace in the word; ``formula_ceiling`` uses
    ``f = 2 eta |T|`` instead.
    """
    _check_pair(aq1, aq2)
    if samples < 1:
        raise ValueError("samples must be positive")
    T, Z, N = aq1.tile_size, aq1.z_size, aq1.degree
    eta = max(aq1.formula_budget, aq2.formula_budget)
    path = (_rng.tag("certify_vanishing"), Z)
    reports = []
    for word in words:
        word = tuple(word)
        _check_alternating(aq1, aq2, word)
        n = len(word) // 2
        mats = [(aq1 if k % 2 == 0 else aq2)(g).image for k, g in enumerate(word)]

        def one(i: int, mats=mats) -> float:
            u = _rng.uniform_permutation(_rng.stream(seed, *path, i), Z)
            V = _conjugator(aq1, u).image
            V_inv = np.argsort(V)
            chain = [p if k % 2 == 0 else V[p[V_inv]] for k, p in enumerate(mats)]
            return np.count_nonzero(_apply_chain(chain, N) == np.arange(N)) / N

        mean, se = _rng.mean_and_stderr(_rng.map_samples(one, samples, workers))
        f = max(extract_blocks(aq1 if k % 2 == 0 else aq2, g).max_block_trace()
                for k, g in enumerate(word))
        c = bound_constant(n)
        ceiling = T ** (2 * n - 1) * (c * f + Fraction(c, Z))
        formula = T ** (2 * n - 1) * (c * 2 * eta * T + Fraction(c, Z))
        reports.append(VanishingReport(
            word, Z, T, n, mean, se, samples, float(ceiling), float(formula), f,
            _rng.seed_label(seed, *path), block_moment_exact(aq1, aq2, word) if exact else None))
    return reports


# -- experiments ----------------------------------------------------------------------


def _subgroup(desc: dict) -> GroupHandle:
    return group_from_descriptor(desc)


def _tile(H: GroupHandle, desc: dict) -> Tile:
    kind = desc.get("type", "whole")
    if kind == "whole":
        if not H.is_finite:
            raise UnsupportedGroup("a whole-group tile needs a finite subgroup")
        return Tile.whole(H)
    if kind == "interval":
        if not isinstance(H, Integers):
            raise UnsupportedGroup("interval tiles need H = Z")
        return Tile.interval(int(desc["length"]))
    raise ValueError(f"unknown tile type {kind!r}")


def _action(G: GroupHandle, desc: dict, seed: int) -> QuasiAction:
    kind = desc.get("type")
    if kind == "regular":
        return regular_action(G, int(desc.get("copies", 1)))
    if kind == "truncated_shift":
        if not isinstance(G, Integers):
            raise UnsupportedGroup("truncated shifts act by Z")
        return truncated_shift_action(int(desc["n"]), desc.get("wrap", "reversed"))
    if kind == "free_random":
        from .groups import FreeGroup
        if not isinstance(G, FreeGroup):
            raise UnsupportedGroup("free_random acts by a free group")
        return free_group_action(G.rank, int(desc["degree"]), int(desc.get("seed", seed)))
    if kind == "table":
        qa = QuasiAction.from_json(desc["quasi_action"])
        if qa.group != G:
            raise ValueError("table quasi-action is for a different group")
        return qa
    raise ValueError(f"unknown action type {kind!r}")


@dataclass
class Experiment:
    """Parsed experiment configuration (see FORMATS.md)."""

    name: str
    factors: tuple
    z_sizes: list
    seeds: int
    max_syllables: int
    syllable_radius: int
    vanishing: dict
    oracle: Optional[dict]
    thresholds: dict
    seed: int

    @classmethod
    def from_json(cls, data, seed: Optional[int] = None) -> "Experiment":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            H = _subgroup(data.get("subgroup", {"type": "trivial"}))
            tile = _tile(H, data.get("tile", {"type": "whole"}))
            K = [h for h in H.ball(int(data.get("K_radius", 1)))]
            master = int(seed if seed is not None else data.get("seed", 0))
            factors = []
            for fdesc in data["factors"]:
                G = group_from_descriptor(fdesc["group"])
                emb = Embedding(H, G, [G.from_json(x) for x in fdesc.get("embedding", [])])
                qa = _action(G, fdesc["action"], master)
                factors.append(align_to_tile(qa, tile, emb, K))
            if len(factors) != 2:
                raise ValueError("exactly two factors are required")
            z_sizes = [int(z) for z in data["z_sizes"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad experiment config: {exc!r}") from exc
        return cls(
            data.get("name", "experiment"), tuple(factors), z_sizes, int(data.get("seeds", 20)),
            int(data.get("max_syllables", 4)), int(data.get("syllable_radius", 1)),
            dict(data.get("vanishing", {})), data.get("exact_oracle"),
            {"mean_dist": 0.9, "sigma": 4.0, **data.get("thresholds", {})}, master)

    def aligned(self, z: int) -> tuple:
        return tuple(amplify_to(aq, z) for aq in self.factors)

    def alphabet(self, i: int) -> list:
        aq = self.factors[i - 1]
        G = aq.group
        return [g for g in G.ball(self.syllable_radius)
                if g != G.identity and not aq.in_subgroup(g)]

    def words(self, max_len: Optional[int] = None) -> list[tuple]:
        """Reduced words up to ``max_len`` syllables, plus nontrivial ``K`` syllables."""
        max_len = self.max_syllables if max_len is None else max_len
        aq1 = self.factors[0]
        H = aq1.tile.group
        out = [((1, aq1.embedding(h)),) for h in aq1.K if h != H.identity]
        for length in range(1, max_len + 1):
            for start in (1, 2):
                factors = [start if k % 2 == 0 else 3 - start for k in range(length)]
                for gs in itertools.product(*[self.alphabet(i) for i in factors]):
                    out.append(tuple(zip(factors, gs)))
        return out

    def alternating_words(self, max_len: int) -> list[tuple]:
        """Even-length words starting in factor 1, as element tuples."""
        out = []
        for length in range(2, max_len + 1, 2):
            alph = [self.alphabet(1 if k % 2 == 0 else 2) for k in range(length)]
            out += list(itertools.product(*alph))
        return out


def format_word(word) -> str:
    return " ".join(f"{i}:{json.dumps(g if not isinstance(g, tuple) else list(g), separators=(',', ':'))}"
                    for i, g in word)


@dataclass
class ExperimentResult:
    rows: list
    summary: dict
    passed: bool


def run_experiment(exp: Experiment, workers: int = 1) -> ExperimentResult:
    sig = float(exp.thresholds["sigma"])
    rows: list = []
    word_summary: list = []
    words = exp.words()
    ok = True
    for z in exp.z_sizes:
        aq1, aq2 = exp.aligned(z)
        amalgams = [build_amalgam(aq1, aq2, exp.seed, j) for j in range(exp.seeds)]
        for w in words:
            res = check_word_distance(amalgams, w)
            for label, dist, direct in zip(res.labels, res.dists, res.direct_dists):
                rows.append({"word": format_word(res.word), "case": res.case, "z": z,
                             "seed": label, "dist": float(dist), "dist_direct": float(direct)})
            passed = res.mean_dist >= exp.thresholds["mean_dist"]
            ok &= passed or z != max(exp.z_sizes)
            word_summary.append({"word": format_word(res.word), "case": res.case, "z": z,
                                 "mean_dist": res.mean_dist, "std_error": res.std_error,
                                 "pass": passed})

    vanishing = []
    vmax = int(exp.vanishing.get("max_syllables", min(exp.max_syllables, 4)))
    vsamples = int(exp.vanishing.get("samples", 400))
    for z in exp.z_sizes:
        aq1, aq2 = exp.aligned(z)
        for rep in certify_vanishing(aq1, aq2, exp.alternating_words(vmax), vsamples, exp.seed, workers):
            good = rep.ok(sig)
            ok &= good
            vanishing.append({"word": format_word(zip([1, 2] * rep.n, rep.word)), "z": z,
                              "estimate": rep.estimate, "std_error": rep.std_error,
                              "ceiling": rep.ceiling, "formula_ceiling": rep.formula_ceiling,
                              "seed": rep.seed_label, "pass": good})

    oracle = []
    if exp.oracle:
        z = int(exp.oracle.get("z", DERANDOMIZE_MAX_Z))
        aq1, aq2 = exp.aligned(z)
        omax = int(exp.oracle.get("max_syllables", 4))
        reps = certify_vanishing(aq1, aq2, exp.alternating_words(omax),
                                 int(exp.oracle.get("samples", 2000)), exp.seed, workers, exact=True)
        for rep in reps:
            word = tuple(zip([1, 2] * rep.n, rep.word))
            derand = Fraction(derandomized_psi(aq1, aq2, word).fixed_points(),
                              aq1.degree * math.factorial(z))
            good = derand == rep.exact and abs(rep.estimate - float(derand)) <= sig * rep.std_error
            ok &= good
            oracle.append({"word": format_word(word), "z": z, "derandomized": str(derand),
                           "block_exact": str(rep.exact), "mc_mean": rep.estimate,
                           "mc_std_error": rep.std_error, "seed": rep.seed_label, "pass": good})

    summary = {
        "name": exp.name,
        "master_seed": exp.seed,
        "seeds": exp.seeds,
        "z_sizes": exp.z_sizes,
        "factors": [aq.summary() for aq in exp.factors],
        "words": word_summary,
        "vanishing": vanishing,
        "oracle": oracle,
        "pass": bool(ok),
    }
    return ExperimentResult(rows, summary, bool(ok))
