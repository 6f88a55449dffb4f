from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from soficperm.moments import (BudgetExceeded, MomentSpec, bound_constant, brute_force_moment,
                               check_s_sum_cap, exact_moment, mc_moment, paper_bound, random_s_sum_case,
                               random_spec, s_sum, s_sum_factored, s_sum_naive, term_within_lemma,
                               weingarten_weight)
from soficperm.partitions import Partition
from soficperm.perm import Permutation, SubPermMatrix
from strategies import permutations, subperms


def _n1_closed_form(a: Permutation, b: Permutation) -> Fraction:
    """E tr(A U B U*): U B U* sends x to A^{-1}x with probability fix(B)/d if A^{-1}x = x,
    else (d - fix(B)) / (d (d-1))."""
    d, fa, fb = a.degree, a.fixed_points(), b.fixed_points()
    total = Fraction(fa * fb, d)
    if d > 1:
        total += Fraction((d - fa) * (d - fb), d * (d - 1))
    return total / d


@settings(max_examples=40)
@given(st.integers(1, 6).flatmap(lambda d: st.tuples(permutations(d), permutations(d))))
def test_exact_matches_closed_form_n1(pair):
    a, b = pair
    spec = MomentSpec((a.to_matrix(), b.to_matrix()))
    assert exact_moment(spec) == _n1_closed_form(a, b)


def test_identity_spec_is_one():
    spec = MomentSpec(tuple(SubPermMatrix.identity(4) for _ in range(4)))
    assert exact_moment(spec) == 1 == brute_force_moment(spec)


def test_fixed_point_free_pair():
    for d in (3, 5, 8):
        spec = MomentSpec((Permutation.cycle(d, 1).to_matrix(), Permutation.cycle(d, 2 % d or 1).to_matrix()))
        assert exact_moment(spec) == Fraction(1, d - 1)


def test_zero_matrix_gives_zero():
    spec = MomentSpec((SubPermMatrix.zero(3), SubPermMatrix.identity(3)))
    assert exact_moment(spec) == 0


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([2, 3, 4]).flatmap(
    lambda d: st.lists(subperms(d), min_size=2, max_size=4).filter(lambda l: len(l) % 2 == 0)))
def test_exact_equals_brute_force(mats):
    spec = MomentSpec(tuple(mats))
    assert exact_moment(spec) == brute_force_moment(spec)


def test_weingarten_weight():
    assert weingarten_weight(2, 4) == Fraction(1, 12)
    assert weingarten_weight(0, 4) == 1
    assert weingarten_weight(5, 4) == 0


def test_budget():
    spec = random_spec(0, 0, [6], [2])
    with pytest.raises(BudgetExceeded):
        exact_moment(spec, budget=10)


def test_spec_validation_and_json():
    with pytest.raises(ValueError):
        MomentSpec((SubPermMatrix.identity(3),))
    with pytest.raises(ValueError):
        MomentSpec((SubPermMatrix.identity(3), SubPermMatrix.identity(4)))
    spec = random_spec(1, 2, [5], [2])
    assert MomentSpec.from_json(spec.to_json()) == spec


def test_mc_close_to_exact_and_worker_independent():
    spec = random_spec(3, 0, [5], [1])
    exact = exact_moment(spec)
    a = mc_moment(spec, 3000, seed=11, workers=1)
    b = mc_moment(spec, 3000, seed=11, workers=4)
    assert a == b
    assert abs(a.mean - float(exact)) <= 5 * a.std_error + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5).flatmap(lambda d: st.tuples(
    st.just(d), st.integers(1, 2).flatmap(lambda m: st.tuples(
        st.lists(st.integers(0, 2 * m - 1), min_size=2 * m, max_size=2 * m),
        st.lists(subperms(d), min_size=m, max_size=m))))))
def test_s_sum_routes_agree(case):
    d, (labels, mats) = case
    p = Partition.from_labels(labels)
    assert s_sum(p, mats, d) == s_sum_naive(p, mats, d) == s_sum_factored(p, mats, d)


def test_s_sum_identity_counts():
    # p = singletons with identity matrices: i_{2j-1} = i_{2j}, free otherwise -> d^m
    assert s_sum(Partition.singletons(4), [SubPermMatrix.identity(5)] * 2, 5) == 25
    # one block forces all indices equal: d choices
    assert s_sum(Partition.one_block(4), [SubPermMatrix.identity(5)] * 2, 5) == 5


def test_s_sum_cap_samples():
    for i in range(40):
        p, mats, d = random_s_sum_case(9, i)
        assert check_s_sum_cap(p, mats, d, naive=d <= 8).ok


def test_paper_bound_ordering():
    for i in range(20):
        spec = random_spec(5, i, [4, 5, 6], [1])
        rep = paper_bound(spec, exact_moment(spec))
        assert rep.ordered
        assert all(term_within_lemma(t, rep.n, rep.d, rep.f_of_d) for t in rep.terms)


def test_paper_bound_needs_large_d():
    with pytest.raises(ValueError):
        paper_bound(random_spec(0, 0, [5], [2]))


def test_bound_constant():
    assert bound_constant(1) == 8 and bound_constant(2) == 16 * 15


def test_report_row_columns():
    spec = random_spec(0, 0, [4], [1])
    row = paper_bound(spec, exact_moment(spec)).row()
    assert set(row) == {"d", "n", "exact", "paper_bound", "cn_dn_bound", "f_of_d"}
