"""Asymptotic freeness experiments for uniform random permutations.

Words ``w(U)`` in independent uniform permutations ``U_1, U_2, ...`` are
interleaved with deterministic permutation families ``B_j``; traces of the
patterns ``w_0 B_{j1} w_1 ... B_{jn} w_n`` are estimated across a sweep of
degrees ``d``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Optional, Sequence

import numpy as np

from . import _rng
from .groups import FreeGroup, free_reduce, parse_word
from .perm import Permutation, dist_to_identity, normalized_hamming
from .sofic import QuasiAction, free_group_action, truncated_shift_action

DEFAULT_SAMPLES = 2000


class WordError(ValueError):
    pass


class ClosureViolation(ValueError):
    """A product ``B_j1 B_j2`` that is neither a family member nor close to the identity."""


# -- words ----------------------------------------------------------------------------


@dataclass(frozen=True)
class FreeWord:
    """Letters ``(generator, +-1)`` with generators numbered from 1."""

    letters: tuple = ()

    def __post_init__(self):
        letters = tuple((int(g), int(e)) for g, e in self.letters)
        for g, e in letters:
            if g < 1 or e not in (1, -1):
                raise WordError(f"bad letter {(g, e)}")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def parse(cls, text: str) -> "FreeWord":
        return cls(tuple(parse_word(text)))

    @property
    def reduced(self) -> bool:
        return free_reduce(self.letters) == self.letters

    def reduce(self) -> "FreeWord":
        return FreeWord(free_reduce(self.letters))

    def is_trivial(self) -> bool:
        return not free_reduce(self.letters)

    def inverse(self) -> "FreeWord":
        return FreeWord(tuple((g, -e) for g, e in reversed(self.letters)))

    def __mul__(self, other: "FreeWord") -> "FreeWord":
        return FreeWord(self.letters + other.letters)

    def __len__(self) -> int:
        return len(self.letters)

    @property
    def rank(self) -> int:
        return max((g for g, _ in self.letters), default=0)

    def __str__(self) -> str:
        return " ".join(f"x{g}" + ("^-1" if e < 0 else "") for g, e in self.letters) or "e"

    def image(self, perms: Sequence[np.ndarray], inverses: Sequence[np.ndarray]) -> np.ndarray:
        """Image array of ``w(U)``; ``perms[i-1]`` is ``U_i``."""
        d = perms[0].size if perms else 0
        out = np.arange(d)
        for g, e in reversed(self.letters):
            out = (perms[g - 1] if e > 0 else inverses[g - 1])[out]
        return out


def commutator() -> FreeWord:
    return FreeWord.parse("x1 x2 x1^-1 x2^-1")


def sample_generators(rng: np.random.Generator, rank: int, d: int) -> tuple[list, list]:
    perms = [_rng.uniform_permutation(rng, d) for _ in range(rank)]
    return perms, [np.argsort(p) for p in perms]


# -- families ---------------------------------------------------------------------------


class DeterministicFamily:
    """Full permutations ``B_{j,d}`` for ``j`` in a finite index set."""

    indices: list

    def matrix(self, j: Hashable, d: int) -> Permutation:
        raise NotImplementedError

    def product_index(self, j1, j2, d: int) -> Optional[Hashable]:
        """``j3`` with ``B_j1 B_j2 = B_j3`` exactly at degree ``d``, if any."""
        target = self.matrix(j1, d) * self.matrix(j2, d)
        for j in self.indices:
            if self.matrix(j, d) == target:
                return j
        return None

    def format_index(self, j) -> str:
        return str(j)

    def parse_index(self, text):
        return text


class CyclePowerFamily(DeterministicFamily):
    """``B_j = c^j`` with ``c`` the cycle ``k -> k+1 mod d``."""

    def __init__(self, indices: Sequence[int]):
        self.indices = [int(j) for j in indices]

    def matrix(self, j, d):
        return Permutation.cycle(d, int(j))

    def product_index(self, j1, j2, d):
        # the family is indexed by all of Z \ {0}; ``indices`` lists those in use
        return j1 + j2 if j1 + j2 != 0 else None

    def parse_index(self, text):
        return int(text)


class QuasiActionFamily(DeterministicFamily):
    """Images ``phi_d(j)`` of group elements under quasi-actions ``phi_d`` of degree ``d``."""

    def __init__(self, factory: Callable[[int], QuasiAction], indices: Sequence,
                 parse: Callable = int, fmt: Callable = str):
        self.factory = factory
        self.indices = list(indices)
        self._parse, self._fmt = parse, fmt
        self._qas: dict = {}

    def qa(self, d: int) -> QuasiAction:
        if d not in self._qas:
            self._qas[d] = self.factory(d)
        return self._qas[d]

    def matrix(self, j, d):
        return self.qa(d)(j)

    def product_index(self, j1, j2, d):
        G = self.qa(d).group
        k = G.multiply(j1, j2)
        if k != G.identity and self.matrix(k, d) == self.matrix(j1, d) * self.matrix(j2, d):
            return k
        return super().product_index(j1, j2, d)

    def format_index(self, j):
        return self._fmt(j)

    def parse_index(self, text):
        return self._parse(text)


def free_group_family(rank: int, words: Sequence[str], seed: int) -> QuasiActionFamily:
    G = FreeGroup(rank)
    return QuasiActionFamily(lambda d: free_group_action(rank, d, seed),
                             [G.from_json(w) for w in words], G.from_json, G.format)


def shift_family(indices: Sequence[int], wrap: str = "cyclic") -> QuasiActionFamily:
    """Images of ``Z`` under the shift quasi-actions of degree ``d``."""
    return QuasiActionFamily(lambda d: truncated_shift_action(d, wrap), [int(j) for j in indices])


class TableFamily(DeterministicFamily):
    """Explicit permutations ``table[d][j]``."""

    def __init__(self, table: dict):
        self.table = {int(d): {str(j): Permutation(p) for j, p in row.items()}
                      for d, row in table.items()}
        keys = {tuple(sorted(row)) for row in self.table.values()}
        if len(keys) != 1:
            raise ValueError("every degree must list the same indices")
        self.indices = list(keys.pop())
        for d, row in self.table.items():
            if any(p.degree != d for p in row.values()):
                raise ValueError(f"table entries under d={d} have the wrong degree")

    def matrix(self, j, d):
        if d not in self.table:
            raise KeyError(f"table has no degree {d}")
        return self.table[d][str(j)]


def family_from_json(data) -> DeterministicFamily:
    if isinstance(data, str):
        data = json.loads(data)
    kind = data.get("type")
    if kind == "cycle_powers":
        return CyclePowerFamily(data["indices"])
    if kind == "free_group":
        return free_group_family(int(data.get("rank", 2)), data["indices"], int(data.get("seed", 0)))
    if kind == "shift":
        return shift_family(data["indices"], data.get("wrap", "cyclic"))
    if kind == "table":
        return TableFamily(data["table"])
    raise ValueError(f"unknown family type {kind!r}")


# -- family verification ------------------------------------------------------------------


@dataclass
class FamilyReport:
    degrees: list
    traces: dict = field(default_factory=dict)        # j -> [tr_d(B_j)]
    exact_products: dict = field(default_factory=dict)  # (j1, j2) -> [j3 or None]
    product_dists: dict = field(default_factory=dict)   # (j1, j2) -> [dist(B_j1 B_j2, id)]
    tolerance: float = 0.05

    def trace_ok(self, j) -> bool:
        traj = [abs(float(x)) for x in self.traces[j]]
        return traj[-1] <= self.tolerance

    def closure_ok(self, pair) -> bool:
        if all(j is not None for j in self.exact_products[pair]):
            return True
        traj = [float(x) for x in self.product_dists[pair]]
        return traj[-1] <= self.tolerance

    @property
    def ok(self) -> bool:
        return all(map(self.trace_ok, self.traces)) and all(map(self.closure_ok, self.exact_products))


def verify_family(fam: DeterministicFamily, d_list: Sequence[int], tolerance: float = 0.05) -> FamilyReport:
    """Trace trajectories of each ``B_j`` and, per pair, exact closure or ``dist(B_j1 B_j2, id)``."""
    rep = FamilyReport(list(d_list), tolerance=tolerance)
    for j in fam.indices:
        rep.traces[j] = [Fraction(fam.matrix(j, d).fixed_points(), d) for d in d_list]
    for j1 in fam.indices:
        for j2 in fam.indices:
            rep.exact_products[(j1, j2)] = [fam.product_index(j1, j2, d) for d in d_list]
            rep.product_dists[(j1, j2)] = [dist_to_identity(fam.matrix(j1, d) * fam.matrix(j2, d))
                                           for d in d_list]
    return rep


# -- mixed patterns -------------------------------------------------------------------------


@dataclass(frozen=True)
class MixedMomentSpec:
    """``w_0 B_{j1} w_1 ... B_{jn} w_n``."""

    words: tuple
    indices: tuple
    degrees: tuple = ()

    def __post_init__(self):
        words = tuple(w if isinstance(w, FreeWord) else FreeWord.parse(w) for w in self.words)
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "indices", tuple(self.indices))
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))
        n = len(self.indices)
        if len(words) != n + 1:
            raise WordError("need exactly one more word than family indices")
        if n == 0 and words[0].is_trivial():
            raise WordError("a pattern without family members needs a nontrivial word")
        if any(w.is_trivial() for w in words[1:n]):
            raise WordError("inner connecting words must be nontrivial")

    @property
    def rank(self) -> int:
        return max(w.rank for w in self.words)

    def __str__(self) -> str:
        parts = [str(self.words[0])]
        for j, w in zip(self.indices, self.words[1:]):
            parts += [f"B[{j}]", str(w)]
        return " ".join(p for p in parts if p != "e") or "e"

    @classmethod
    def from_json(cls, data, fam: Optional[DeterministicFamily] = None) -> "MixedMomentSpec":
        if isinstance(data, str):
            data = json.loads(data)
        parse = fam.parse_index if fam else (lambda x: x)
        return cls(tuple(data["words"]), tuple(parse(j) for j in data.get("indices", [])),
                   tuple(data.get("degrees", ())))


def _pattern_image(words: Sequence[FreeWord], blocks: Sequence[np.ndarray], perms, inverses,
                   d: int, conj: Optional[tuple] = None) -> np.ndarray:
    chain: list = []
    for k, w in enumerate(words):
        img = w.image(perms, inverses) if w.letters else np.arange(d)
        if conj is not None:
            V, V_inv = conj
            img = V[img[V_inv]]
        chain.append(img)
        if k < len(blocks):
            chain.append(blocks[k])
    out = np.arange(d)
    for p in reversed(chain):
        out = p[out]
    return out


def pattern_trace(spec: MixedMomentSpec, fam: Optional[DeterministicFamily], perms, inverses,
                  d: int) -> float:
    blocks = [fam.matrix(j, d).image for j in spec.indices] if spec.indices else []
    img = _pattern_image(spec.words, blocks, perms, inverses, d)
    return np.count_nonzero(img == np.arange(d)) / d


@dataclass(frozen=True)
class ReducedMixed:
    """Canonical form: ``afree1`` (one nontrivial word), ``afree2`` (one ``B``),
    ``afree3`` (alternating ``B``'s and nontrivial words), or ``identity``.
    ``error_bound`` sums ``dist(B_j1 B_j2, id)`` over pairs dropped as near-identity."""

    form: str
    words: tuple
    indices: tuple
    exact: bool
    error_bound: Fraction = Fraction(0)


def cyclic_reduce_mixed(spec: MixedMomentSpec, fam: Optional[DeterministicFamily], d: int) -> ReducedMixed:
    """Rotate ``w_n`` onto ``w_0``, then repeatedly merge two ``B``'s separated by a
    trivial word: exactly when the family is closed under the product, otherwise by
    dropping a near-identity product (recorded in ``error_bound``)."""
    n = len(spec.indices)
    if n == 0:
        w = spec.words[0].reduce()
        return ReducedMixed("afree1" if w.letters else "identity", (w,), (), True)
    # cyclic list of (j_k, u_k) standing for B_{j_k} u_k; u_n = w_n w_0
    us = [w.reduce() for w in spec.words[1:n]] + [(spec.words[n] * spec.words[0]).reduce()]
    cyc = list(zip(spec.indices, us))
    exact, err = True, Fraction(0)
    while len(cyc) > 1:
        k = next((i for i, (_, u) in enumerate(cyc) if not u.letters), None)
        if k is None:
            break
        nxt = (k + 1) % len(cyc)
        j3 = fam.product_index(cyc[k][0], cyc[nxt][0], d)
        if j3 is not None:
            cyc[k] = (j3, cyc[nxt][1])
            del cyc[nxt]
            continue
        dist = dist_to_identity(fam.matrix(cyc[k][0], d) * fam.matrix(cyc[nxt][0], d))
        if dist > Fraction(1, 2):
            raise ClosureViolation(f"B[{cyc[k][0]}] B[{cyc[nxt][0]}] is neither a family member "
                                   "nor close to the identity")
        exact, err = exact and dist == 0, err + dist
        if len(cyc) == 2:
            w = cyc[nxt][1]
            return ReducedMixed("afree1" if w.letters else "identity", (w,), (), exact, err)
        prev = (k - 1) % len(cyc)
        cyc[prev] = (cyc[prev][0], (cyc[prev][1] * cyc[nxt][1]).reduce())
        cyc = [x for i, x in enumerate(cyc) if i not in (k, nxt)]
    js = tuple(j for j, _ in cyc)
    words = (FreeWord(),) + tuple(u for _, u in cyc)
    if len(cyc) == 1 and not cyc[0][1].letters:
        return ReducedMixed("afree2", words, js, exact, err)
    return ReducedMixed("afree3", words, js, exact, err)


# -- sweeps ----------------------------------------------------------------------------------


@dataclass
class TrajectoryPoint:
    d: int
    estimate: float
    std_error: float
    samples: int
    seed_label: str
    bound: Optional[float] = None

    def row(self) -> dict:
        return {"d": self.d, "estimate": self.estimate, "std_error": self.std_error,
                "bound": "" if self.bound is None else self.bound, "seed": self.seed_label}


def decreasing_within(points: Sequence[TrajectoryPoint], sigmas: float = 2.0) -> bool:
    """Each estimate at most the previous one plus ``sigmas`` combined standard errors."""
    return all(b.estimate <= a.estimate + sigmas * math.hypot(a.std_error, b.std_error)
               for a, b in zip(points, points[1:]))


def decay_passes(points: Sequence[TrajectoryPoint], final_threshold: float = 0.05,
                 sigmas: float = 2.0) -> bool:
    return decreasing_within(points, sigmas) and abs(points[-1].estimate) <= final_threshold


def _sweep(trace_fn: Callable[[np.random.Generator, int], float], d_list, samples, seed, name, workers):
    if samples < 1:
        raise ValueError("samples must be positive")
    key = _rng.tag(name)
    out = []
    for d in d_list:
        vals = _rng.map_samples(lambda i, d=d: trace_fn(_rng.stream(seed, key, d, i), d), samples, workers)
        mean, se = _rng.mean_and_stderr(vals)
        out.append(TrajectoryPoint(int(d), mean, se, samples, _rng.seed_label(seed, key, d)))
    return out


def nica_decay(w: FreeWord, d_list: Sequence[int], samples: int = DEFAULT_SAMPLES, seed: int = 0,
               workers: int = 1) -> list[TrajectoryPoint]:
    """Monte Carlo ``E tr_d(w(U))`` across ``d_list``."""
    w = w.reduce()
    if not w.letters:
        raise WordError("the trivial word has trace 1 at every d")

    def one(rng, d):
        perms, inv = sample_generators(rng, w.rank, d)
        return np.count_nonzero(w.image(perms, inv) == np.arange(d)) / d

    return _sweep(one, d_list, samples, seed, "nica_decay", workers)


def mixed_decay(spec: MixedMomentSpec, fam: Optional[DeterministicFamily], d_list: Optional[Sequence[int]] = None,
                samples: int = DEFAULT_SAMPLES, seed: int = 0, workers: int = 1,
                conjugated: bool = False) -> list[TrajectoryPoint]:
    """Monte Carlo trace of the pattern; with ``conjugated`` each word ``w`` is
    replaced by ``V w V*`` for an extra independent uniform ``V``."""
    d_list = list(d_list if d_list is not None else spec.degrees)
    if not d_list:
        raise ValueError("no degrees given")
    if spec.indices and fam is None:
        raise ValueError("pattern uses a family but none was given")
    rank = max(spec.rank, 1)
    blocks_at = {d: [fam.matrix(j, d).image for j in spec.indices] if spec.indices else [] for d in d_list}

    def one(rng, d):
        perms, inv = sample_generators(rng, rank, d)
        conj = None
        if conjugated:
            V = _rng.uniform_permutation(rng, d)
            conj = (V, np.argsort(V))
        img = _pattern_image(spec.words, blocks_at[d], perms, inv, d, conj)
        return np.count_nonzero(img == np.arange(d)) / d

    return _sweep(one, d_list, samples, seed, "mixed_bvu" if conjugated else "mixed_decay", workers)


def estimators_agree(a: Sequence[TrajectoryPoint], b: Sequence[TrajectoryPoint], sigmas: float = 4.0) -> bool:
    return all(abs(x.estimate - y.estimate) <= sigmas * math.hypot(x.std_error, y.std_error)
               for x, y in zip(a, b))


def trace_change_bound(C: Permutation, D: Permutation, V: Permutation) -> bool:
    """``|tr(VC) - tr(VD)| <= dist(C, D)``."""
    d = C.degree
    lhs = abs(Fraction((V * C).fixed_points() - (V * D).fixed_points(), d))
    return lhs <= normalized_hamming(C, D)
