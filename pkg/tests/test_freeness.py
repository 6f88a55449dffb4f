import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from soficperm import _rng
from soficperm.freeness import (ClosureViolation, CyclePowerFamily, FreeWord, MixedMomentSpec, TableFamily,
                                WordError, commutator, cyclic_reduce_mixed, decay_passes, estimators_agree,
                                family_from_json, free_group_family, mixed_decay, nica_decay, pattern_trace,
                                sample_generators, shift_family, trace_change_bound, verify_family)
from soficperm.perm import Permutation
from strategies import perm_pairs

letters = st.lists(st.tuples(st.integers(1, 3), st.sampled_from([1, -1])), max_size=10)


def test_reduce_examples():
    assert FreeWord.parse("x1 x1^-1").reduce() == FreeWord()
    w = FreeWord.parse("x1 x2^-1")
    assert w.reduce() == w and w.reduced
    assert FreeWord.parse("x1 x2 x2^-1 x1").reduce() == FreeWord.parse("x1^2")


@settings(max_examples=40)
@given(letters, st.integers(0, 2**32))
def test_evaluation_respects_reduction(ls, seed):
    w = FreeWord(tuple(ls))
    perms, inv = sample_generators(_rng.stream(seed), 3, 9)
    assert np.array_equal(w.image(perms, inv), w.reduce().image(perms, inv))
    assert np.array_equal(w.image(perms, inv)[(w.inverse()).image(perms, inv)], np.arange(9))


def _brute_mean_fixed_points(k: int, d: int) -> Fraction:
    total = 0
    for p in itertools.permutations(range(d)):
        x = np.arange(d)
        for _ in range(k):
            x = np.asarray(p)[x]
        total += int(np.count_nonzero(x == np.arange(d)))
    return Fraction(total, len(list(itertools.permutations(range(d)))))


@pytest.mark.parametrize("k, d", [(2, 4), (3, 5), (4, 6), (6, 6)])
def test_power_word_against_brute_force(k, d):
    brute = _brute_mean_fixed_points(k, d)
    # E fix(sigma^k) counts divisors of k not exceeding d
    assert brute == sum(1 for m in range(1, d + 1) if k % m == 0)
    est = nica_decay(FreeWord.parse(f"x1^{k}"), [d], samples=4000, seed=1)[0]
    assert abs(est.estimate - float(brute / d)) <= 4 * est.std_error


def test_nica_decay_trivial_word():
    with pytest.raises(WordError):
        nica_decay(FreeWord.parse("x1 x1^-1"), [10], samples=10)


def test_nica_decay_deterministic_across_workers():
    a = nica_decay(commutator(), [30, 60], samples=200, seed=5, workers=1)
    b = nica_decay(commutator(), [30, 60], samples=200, seed=5, workers=3)
    assert [p.row() for p in a] == [p.row() for p in b]


def test_commutator_decay_small():
    traj = nica_decay(commutator(), [20, 80, 320], samples=600, seed=2)
    assert decay_passes(traj, 0.05)


def test_spec_invariants():
    with pytest.raises(WordError):
        MixedMomentSpec(("",), ())
    with pytest.raises(WordError):
        MixedMomentSpec(("x1", "", "x1"), (1, 2))
    MixedMomentSpec(("", ""), (1,))


def test_pure_b_form_has_no_variance():
    fam = CyclePowerFamily([1, 3])
    spec = MixedMomentSpec(("", ""), (3,))
    assert cyclic_reduce_mixed(spec, fam, 9).form == "afree2"
    # shift by 3 is the identity on 3 points and fixed-point free on 9
    traj = mixed_decay(spec, fam, [3, 9], samples=50, seed=0)
    assert [p.estimate for p in traj] == [1.0, 0.0] and all(p.std_error == 0 for p in traj)


def test_reduction_forms():
    fam = CyclePowerFamily([1, 2, -1])
    assert cyclic_reduce_mixed(MixedMomentSpec(("x1 x2",), ()), fam, 10).form == "afree1"
    merged = cyclic_reduce_mixed(MixedMomentSpec(("x1", "x2", "x1^-1"), (1, 2)), fam, 10)
    assert merged.form == "afree3" and merged.indices == (3,) and merged.exact
    dropped = cyclic_reduce_mixed(MixedMomentSpec(("x1", "x2", "x1^-1"), (1, -1)), fam, 10)
    assert dropped.form == "afree1" and dropped.exact


def test_merged_form_preserves_trace_per_sample():
    fam = CyclePowerFamily([1, 2])
    spec = MixedMomentSpec(("x1 x2", "x2", "x2^-1 x1^-1"), (1, 2))
    red = cyclic_reduce_mixed(spec, fam, 12)
    reduced_spec = MixedMomentSpec(red.words, red.indices)
    for seed in range(10):
        perms, inv = sample_generators(_rng.stream(seed), 2, 12)
        assert pattern_trace(spec, fam, perms, inv, 12) == pattern_trace(reduced_spec, fam, perms, inv, 12)


def test_rotation_invariance_per_sample():
    fam = CyclePowerFamily([1, 2])
    a = MixedMomentSpec(("x1", "x2", "x1 x2"), (1, 2))
    b = MixedMomentSpec(("", "x1 x2 x1", "x2"), (2, 1))  # rotated: B2 (x1 x2 x1) B1 x2
    for seed in range(10):
        perms, inv = sample_generators(_rng.stream(seed), 2, 15)
        assert pattern_trace(a, fam, perms, inv, 15) == pattern_trace(b, fam, perms, inv, 15)


def test_closure_violation():
    fam = TableFamily({6: {"s": [1, 0, 2, 3, 4, 5], "t": [0, 1, 3, 2, 4, 5]}})
    with pytest.raises(ClosureViolation):
        cyclic_reduce_mixed(MixedMomentSpec(("x1", "x2", "x1^-1"), ("s", "t")), fam, 6)


def test_afree_and_bvu_agree():
    fam = CyclePowerFamily([1, 2])
    spec = MixedMomentSpec(("", "x1 x2 x1^-1 x2^-1", "x1 x2 x1^-1 x2^-1"), (1, 2))
    a = mixed_decay(spec, fam, [40], samples=800, seed=8)
    b = mixed_decay(spec, fam, [40], samples=800, seed=8, conjugated=True)
    assert estimators_agree(a, b, 4.0)


@given(perm_pairs(3))
def test_trace_change_bound(ps):
    C, D, V = ps
    assert trace_change_bound(C, D, V)


def test_cycle_family_conditions():
    rep = verify_family(CyclePowerFamily([1, 2, -1, -2]), [16, 64])
    assert rep.ok
    assert rep.exact_products[(1, 2)] == [3, 3]
    assert rep.exact_products[(1, -1)] == [None, None] and rep.product_dists[(1, -1)] == [0, 0]


def test_transposition_family_flagged():
    fam = TableFamily({8: {"s": [1, 0, 2, 3, 4, 5, 6, 7]}, 16: {"s": [1, 0] + list(range(2, 16))}})
    rep = verify_family(fam, [8, 16])
    assert not rep.trace_ok("s")
    assert rep.traces["s"] == [Fraction(6, 8), Fraction(14, 16)]


def test_singleton_shift_family():
    rep = verify_family(CyclePowerFamily([1]), [32])
    assert rep.closure_ok((1, 1))


def test_builtin_families():
    fg = free_group_family(2, ["x1", "x2", "x1 x2"], seed=3)
    assert fg.product_index((1,), (2,), 64) == (1, 2)
    assert verify_family(fg, [128, 512]).ok
    assert verify_family(shift_family([1, 2]), [64]).ok
    assert not verify_family(shift_family([1, 2], wrap="reversed"), [64]).ok
    fam = family_from_json({"type": "cycle_powers", "indices": [1]})
    assert fam.matrix(1, 5) == Permutation.cycle(5, 1)
