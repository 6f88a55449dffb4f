"""Moments ``E tr_d(B1 (U B2 U*) B3 (U B4 U*) ... B_{2n-1} (U B_{2n} U*))``.

Three independent routes are provided:

* :func:`exact_moment` expands the trace over matrix indices and integrates
  each product of entries of ``U`` with the rule
  ``E[u_{k1,l1} ... u_{km,lm}] = (d-|r|)!/d!`` if the row pattern ``r`` equals
  the column pattern ``s``, else 0.
* :func:`brute_force_moment` averages over all ``d!`` permutations.
* :func:`mc_moment` samples uniform permutations.

:func:`paper_bound` evaluates the partition-sum upper bound built from
:func:`s_sum` and the closed form ``C_n f(d) + D_n / d``.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _rng
from .partitions import (IndexMapPair, Partition, bell, enumerate_partitions, eta, eta_prime,
                         has_matched_pair, join, lift_p_of_r)
from .perm import EMPTY, SubPermMatrix, as_matrix, normalized_trace

DEFAULT_BUDGET = 10**8
BUDGET_ENV = "SOFICPERM_BUDGET"
BRUTE_FORCE_MAX_DEGREE = 8
PAPER_BOUND_MAX_2N = 8


class BudgetExceeded(RuntimeError):
    pass


def default_budget() -> int:
    return int(os.environ.get(BUDGET_ENV, DEFAULT_BUDGET))


@dataclass(frozen=True)
class MomentSpec:
    """Word ``B1 (U B2 U*) ... B_{2n-1} (U B_{2n} U*)``; odd positions sit outside,
    even positions are conjugated by ``U``."""

    matrices: tuple[SubPermMatrix, ...]

    def __post_init__(self):
        mats = tuple(as_matrix(m) for m in self.matrices)
        if not mats or len(mats) % 2:
            raise ValueError("need an even, positive number of matrices")
        if len({m.degree for m in mats}) != 1:
            raise ValueError("all matrices must share one degree")
        object.__setattr__(self, "matrices", mats)

    @property
    def degree(self) -> int:
        return self.matrices[0].degree

    @property
    def half_length(self) -> int:
        return len(self.matrices) // 2

    def f_of_d(self) -> Fraction:
        return max(normalized_trace(m) for m in self.matrices)

    def to_json(self) -> dict:
        return {"degree": self.degree, "matrices": [m.to_json() for m in self.matrices]}

    @classmethod
    def from_json(cls, data) -> "MomentSpec":
        if isinstance(data, str):
            data = json.loads(data)
        spec = cls(tuple(SubPermMatrix.from_json(m) for m in data["matrices"]))
        if "degree" in data and int(data["degree"]) != spec.degree:
            raise ValueError("declared degree disagrees with the matrices")
        return spec


def weingarten_weight(blocks: int, d: int) -> Fraction:
    """``(d - blocks)! / d!``; zero when ``blocks > d`` (no index tuple realizes it)."""
    if blocks > d:
        return Fraction(0)
    return Fraction(1, math.perm(d, blocks))


# -- exact expansion -----------------------------------------------------------


def _block_count(idx: np.ndarray) -> np.ndarray:
    """Number of distinct values per row of ``idx``."""
    s = np.sort(idx, axis=1)
    return 1 + np.count_nonzero(np.diff(s, axis=1), axis=1)


def _same_pattern(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m = a.shape[1]
    ok = np.ones(a.shape[0], dtype=bool)
    for x, y in itertools.combinations(range(m), 2):
        ok &= (a[:, x] == a[:, y]) == (b[:, x] == b[:, y])
    return ok


def exact_moment(spec: MomentSpec, budget: Optional[int] = None) -> Fraction:
    """Exact rational value of the moment.

    Only column indices are free: ``b^{(j)}_{i_{2j-1}, i_{2j}}`` is nonzero only
    for ``i_{2j-1} = image_j[i_{2j}]``.  The row/column positions of the Haar
    factors are read off through the ``f``/``g`` index maps.
    """
    d, n = spec.degree, spec.half_length
    budget = default_budget() if budget is None else budget
    if d ** (2 * n) > budget:
        raise BudgetExceeded(f"d^(2n) = {d}^{2 * n} column tuples exceed budget {budget}")
    maps = IndexMapPair.build(n)
    counts = np.zeros(2 * n + 1, dtype=object)
    chunk_free = min(2 * n, 4)
    # enumerate the last chunk_free free columns as a grid, loop over the rest
    outer = itertools.product(range(d), repeat=2 * n - chunk_free)
    grid = np.stack(np.meshgrid(*[np.arange(d)] * chunk_free, indexing="ij"), -1).reshape(-1, chunk_free)
    for head in outer:
        cols = np.hstack([np.tile(np.array(head, dtype=np.int64), (grid.shape[0], 1)), grid])
        idx = np.empty((cols.shape[0], 4 * n), dtype=np.int64)  # 0-based positions of i_1..i_4n
        live = np.ones(cols.shape[0], dtype=bool)
        for j, B in enumerate(spec.matrices):
            rows = B.image[cols[:, j]]
            live &= rows != EMPTY
            idx[:, 2 * j] = rows
            idx[:, 2 * j + 1] = cols[:, j]
        idx = idx[live]
        if idx.shape[0] == 0:
            continue
        hrows = idx[:, [fj - 1 for fj in maps.f]]
        hcols = idx[:, [gj - 1 for gj in maps.g]]
        keep = _same_pattern(hrows, hcols)
        nb = _block_count(hrows[keep])
        for b, c in zip(*np.unique(nb, return_counts=True)):
            counts[int(b)] += int(c)
    total = sum((Fraction(int(c)) * weingarten_weight(b, d) for b, c in enumerate(counts) if c), Fraction(0))
    return total / d


# -- brute force over S_d ------------------------------------------------------


def _word_fixed_points(spec: MomentSpec, sigma: np.ndarray, sigma_inv: np.ndarray) -> np.ndarray:
    """Fixed-point counts of the word for a batch of permutations (one per row)."""
    batch, d = sigma.shape
    cur = np.tile(np.arange(d), (batch, 1))
    rows = np.arange(batch)[:, None]
    for j in reversed(range(spec.half_length)):
        B_out, B_in = spec.matrices[2 * j], spec.matrices[2 * j + 1]
        # cur <- B_out o sigma o B_in o sigma^{-1} o cur
        for step in ("sinv", "Bin", "s", "Bout"):
            live = cur != EMPTY
            safe = np.where(live, cur, 0)
            if step == "sinv":
                nxt = sigma_inv[rows, safe]
            elif step == "s":
                nxt = sigma[rows, safe]
            else:
                nxt = (B_in if step == "Bin" else B_out).image[safe]
            cur = np.where(live, nxt, EMPTY)
    return np.count_nonzero(cur == np.arange(d), axis=1)


def brute_force_moment(spec: MomentSpec) -> Fraction:
    """Average of ``tr_d`` of the word over every permutation of degree ``d``."""
    d = spec.degree
    if d > BRUTE_FORCE_MAX_DEGREE:
        raise BudgetExceeded(f"brute force limited to d <= {BRUTE_FORCE_MAX_DEGREE}")
    sigma = np.array(list(itertools.permutations(range(d))), dtype=np.int64)
    sigma_inv = np.argsort(sigma, axis=1)
    fixed = int(_word_fixed_points(spec, sigma, sigma_inv).sum())
    return Fraction(fixed, d * math.factorial(d))


# -- Monte Carlo ----------------------------------------------------------------


@dataclass(frozen=True)
class MCResult:
    mean: float
    std_error: float
    samples: int
    seed: int


def word_trace(spec: MomentSpec, sigma: np.ndarray) -> float:
    sigma = np.asarray(sigma)[None, :]
    return float(_word_fixed_points(spec, sigma, np.argsort(sigma, axis=1))[0]) / spec.degree


def mc_moment(spec: MomentSpec, samples: int, seed: int, workers: int = 1) -> MCResult:
    if samples < 1:
        raise ValueError("samples must be positive")
    d = spec.degree
    key = _rng.tag("mc_moment")

    def one(i: int) -> float:
        return word_trace(spec, _rng.uniform_permutation(_rng.stream(seed, key, d, i), d))

    mean, se = _rng.mean_and_stderr(_rng.map_samples(one, samples, workers))
    return MCResult(mean, se, samples, seed)


# -- S(p, d) ----------------------------------------------------------------------


def _components(p: Partition, m: int) -> list[list[int]]:
    """Matrix indices grouped by the blocks of ``p v eta``."""
    uf = list(range(len(p)))

    def find(x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    for j in range(m):
        a, b = find(p.block_id[2 * j]), find(p.block_id[2 * j + 1])
        uf[max(a, b)] = min(a, b)
    groups: dict[int, list[int]] = {}
    for j in range(m):
        groups.setdefault(find(p.block_id[2 * j]), []).append(j)
    return list(groups.values())


def _component_count(p: Partition, mats: Sequence[SubPermMatrix], js: list[int], d: int) -> int:
    """Index assignments for one connected block, propagated from each root value."""
    edges = [(p.block_id[2 * j], p.block_id[2 * j + 1], mats[j]) for j in js]
    root = edges[0][1]
    val = {root: np.arange(d)}
    alive = np.ones(d, dtype=bool)
    pending = list(edges)
    while pending:
        progressed = False
        rest = []
        for row_b, col_b, B in pending:
            if col_b in val:
                c = val[col_b]
                r = np.where(c >= 0, B.image[np.where(c >= 0, c, 0)], EMPTY)
                if row_b in val:
                    alive &= val[row_b] == r
                else:
                    val[row_b] = r
                alive &= r != EMPTY
                progressed = True
            elif row_b in val:
                inv = B.transpose().image
                r = val[row_b]
                c = np.where(r >= 0, inv[np.where(r >= 0, r, 0)], EMPTY)
                val[col_b] = c
                alive &= c != EMPTY
                progressed = True
            else:
                rest.append((row_b, col_b, B))
        if not progressed:
            raise AssertionError("component is not connected")
        pending = rest
    return int(np.count_nonzero(alive))


def _check_s_args(p: Partition, mats: Sequence, d: int) -> list[SubPermMatrix]:
    mats = [as_matrix(m) for m in mats]
    if p.ground_size != 2 * len(mats):
        raise ValueError(f"partition on {p.ground_size} points needs {p.ground_size // 2} matrices")
    if any(m.degree != d for m in mats):
        raise ValueError("matrix degree differs from d")
    return mats


def s_sum(p: Partition, matrices: Sequence[SubPermMatrix], d: int) -> int:
    """Number of ``i in {0..d-1}^{2m}`` constant on blocks of ``p`` with
    ``b^{(1)}_{i1,i2} ... b^{(m)}_{i_{2m-1},i_{2m}} = 1``.

    Factorizes over the blocks of ``p v eta``; inside a block the sub-permutation
    structure fixes every index once one is chosen, so each block costs ``O(d)``.
    """
    mats = _check_s_args(p, matrices, d)
    total = 1
    for js in _components(p, len(mats)):
        total *= _component_count(p, mats, js, d)
        if total == 0:
            break
    return total


def s_sum_naive(p: Partition, matrices: Sequence[SubPermMatrix], d: int) -> int:
    """Direct enumeration of all ``d^{2m}`` index tuples (test oracle)."""
    mats = _check_s_args(p, matrices, d)
    m = len(mats)
    dense = [x.to_dense() for x in mats]
    idx = np.indices((d,) * (2 * m)).reshape(2 * m, -1)
    ok = np.ones(idx.shape[1], dtype=bool)
    for k in range(2 * m):
        for l in range(k + 1, 2 * m):
            if p.same_block(k, l):
                ok &= idx[k] == idx[l]
    for j in range(m):
        ok &= dense[j][idx[2 * j], idx[2 * j + 1]] == 1
    return int(np.count_nonzero(ok))


def s_sum_factored(p: Partition, matrices: Sequence[SubPermMatrix], d: int) -> int:
    """Product over blocks of ``p v eta`` of naive sums on the restricted sub-problems."""
    mats = _check_s_args(p, matrices, d)
    total = 1
    for js in _components(p, len(mats)):
        pts = [k for j in js for k in (2 * j, 2 * j + 1)]
        total *= s_sum_naive(p.restrict(pts), [mats[j] for j in js], d)
    return total


# -- bound ------------------------------------------------------------------------


def bound_constant(n: int) -> int:
    """``C_n = D_n = 2^{2n} Bell(2n)``."""
    return 4**n * bell(2 * n)


@dataclass
class BoundReport:
    d: int
    n: int
    f_of_d: Fraction
    paper_bound: Fraction
    cn_dn_bound: Fraction
    exact: Optional[Fraction] = None
    terms: list = field(default_factory=list, repr=False)

    @property
    def ordered(self) -> bool:
        ok = self.paper_bound <= self.cn_dn_bound
        if self.exact is not None:
            ok = ok and self.exact <= self.paper_bound
        return ok

    def row(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "exact": None if self.exact is None else float(self.exact),
            "paper_bound": float(self.paper_bound),
            "cn_dn_bound": float(self.cn_dn_bound),
            "f_of_d": float(self.f_of_d),
        }


def paper_bound(spec: MomentSpec, exact: Optional[Fraction] = None) -> BoundReport:
    """``2^{2n} sum_r d^{-|r|-1} S(B_1..B_{2n}; p(r), d)`` and ``C_n f(d) + D_n/d``.

    Valid for ``d >= 4n``.  Each term is recorded as
    ``(r, |r|, S, matched_pair)``.
    """
    d, n = spec.degree, spec.half_length
    if d < 4 * n:
        raise ValueError(f"the bound needs d >= 4n (d={d}, n={n})")
    if 2 * n > PAPER_BOUND_MAX_2N:
        raise BudgetExceeded(f"2n={2 * n} exceeds {PAPER_BOUND_MAX_2N}")
    maps = IndexMapPair.build(n)
    total = Fraction(0)
    terms = []
    for r in enumerate_partitions(2 * n):
        p = lift_p_of_r(r, maps)
        s = s_sum(p, spec.matrices, d)
        total += Fraction(s, d ** (len(r) + 1))
        terms.append((r, len(r), s, has_matched_pair(p)))
    f = spec.f_of_d()
    c = bound_constant(n)
    return BoundReport(d, n, f, 4**n * total, c * f + Fraction(c, d), exact, terms)


def term_within_lemma(term, n: int, d: int, f: Fraction) -> bool:
    """Per-term domination: ``S <= d^{|r v eta|+|r v eta'|}``, times ``f`` with a matched pair."""
    r, _, s, matched = term
    cap = d ** (len(join(r, eta(n))) + len(join(r, eta_prime(n))))
    return s <= (f * cap if matched else cap)


# -- random instances ---------------------------------------------------------------


def random_subperm(rng: np.random.Generator, d: int, density: float = 1.0) -> SubPermMatrix:
    """Uniform permutation with each column kept with probability ``density``."""
    image = _rng.uniform_permutation(rng, d)
    image[rng.random(d) >= density] = EMPTY
    return SubPermMatrix(d, image, check=False)


def random_spec(seed: int, index: int, degrees: Sequence[int], halves: Sequence[int]) -> MomentSpec:
    """Spec number ``index`` of a seeded family; degree, ``n`` and density drawn per spec."""
    rng = _rng.stream(seed, _rng.tag("random_spec"), index)
    d = int(rng.choice(degrees))
    n = int(rng.choice(halves))
    density = float(rng.uniform(0.3, 1.0))
    return MomentSpec(tuple(random_subperm(rng, d, density) for _ in range(2 * n)))


@dataclass(frozen=True)
class SSumCapCheck:
    """``S(p, d) <= d^{|p v eta|}``, and ``<= f d^{|p v eta|}`` when ``p`` has a matched pair."""

    s: int
    cap: int
    f: Fraction
    matched: bool
    naive: Optional[int] = None

    @property
    def ok(self) -> bool:
        good = self.s <= self.cap and (not self.matched or self.s <= self.f * self.cap)
        return good and (self.naive is None or self.naive == self.s)


def check_s_sum_cap(p: Partition, matrices: Sequence[SubPermMatrix], d: int, naive: bool = False) -> SSumCapCheck:
    mats = _check_s_args(p, matrices, d)
    s = s_sum(p, mats, d)
    cap = d ** len(join(p, eta(len(mats))))
    f = max(normalized_trace(m) for m in mats)
    return SSumCapCheck(s, cap, f, has_matched_pair(p), s_sum_naive(p, mats, d) if naive else None)


def random_s_sum_case(seed: int, index: int, max_d: int = 20, max_m: int = 3):
    """Random ``(p, matrices, d)``; ``p`` comes from uniformly random block labels."""
    rng = _rng.stream(seed, _rng.tag("s_sum_cap"), index)
    d = int(rng.integers(1, max_d + 1))
    m = int(rng.integers(1, max_m + 1))
    p = Partition.from_labels(rng.integers(0, 2 * m, size=2 * m).tolist())
    density = float(rng.uniform(0.3, 1.0))
    return p, [random_subperm(rng, d, density) for _ in range(m)], d
