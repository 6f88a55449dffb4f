import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, strategies as st

from soficperm.perm import (DegreeMismatch, Permutation, SubPermMatrix, apply_partial, compose,
                            dist_to_identity, multiply, normalized_hamming, normalized_trace)
from strategies import perm_pairs, permutations, subperms


def test_cycle_has_no_fixed_points():
    assert Permutation.cycle(5, 1).fixed_points() == 0
    assert normalized_trace(Permutation.cycle(5, 1).to_matrix()) == 0


def test_rejects_non_permutation():
    with pytest.raises(ValueError):
        Permutation([0, 0, 1])


def test_degree_mismatch():
    with pytest.raises(DegreeMismatch):
        compose(Permutation.identity(3), Permutation.identity(4))


@given(perm_pairs(3))
def test_compose_associative(ps):
    a, b, c = ps
    assert compose(compose(a, b), c) == compose(a, compose(b, c))


@given(perm_pairs(2))
def test_matrix_of_product_is_product_of_matrices(ps):
    a, b = ps
    assert np.array_equal(compose(a, b).to_matrix().to_dense(),
                          a.to_matrix().to_dense() @ b.to_matrix().to_dense())


@given(permutations())
def test_inverse(p):
    assert p * p.inverse() == Permutation.identity(p.degree)


@given(perm_pairs(3))
def test_hamming_bi_invariant(ps):
    a, b, c = ps
    assert normalized_hamming(a, b) == normalized_hamming(c * a, c * b) == normalized_hamming(a * c, b * c)


@given(perm_pairs(2))
def test_trace_conjugation_invariant(ps):
    a, v = ps
    assert (v * a * v.inverse()).fixed_points() == a.fixed_points()


@given(perm_pairs(2))
def test_distance_is_one_minus_trace_of_quotient(ps):
    a, b = ps
    assert normalized_hamming(a, b) == 1 - normalized_trace((a.inverse() * b).to_matrix())


def test_distance_to_identity_of_transposition():
    assert dist_to_identity(Permutation([1, 0, 2, 3])) == Fraction(1, 2)


@given(st.integers(1, 7).flatmap(lambda d: st.tuples(subperms(d), subperms(d))))
def test_subperm_product_matches_dense(pair):
    a, b = pair
    assert np.array_equal(multiply(a, b).to_dense(), a.to_dense() @ b.to_dense())
    assert (a @ b).nnz <= min(a.nnz, b.nnz)


@given(st.integers(1, 7).flatmap(subperms))
def test_subperm_roundtrips(m):
    assert SubPermMatrix.from_json(m.to_json()) == m
    assert SubPermMatrix.from_dense(m.to_dense()) == m
    assert m.transpose().transpose() == m
    assert np.array_equal(m.transpose().to_dense(), m.to_dense().T)


def test_subperm_entries_are_row_col():
    m = SubPermMatrix.from_entries(3, [(2, 0)])
    assert m.to_dense()[2, 0] == 1 and m.nnz == 1
    assert m.entries() == [(2, 0)]


def test_subperm_rejects_two_entries_in_a_row():
    with pytest.raises(ValueError):
        SubPermMatrix.from_entries(3, [(0, 0), (0, 1)])


def test_apply_partial_propagates_holes():
    outer = np.array([2, -1, 0])
    inner = np.array([1, -1, 0])
    assert apply_partial(outer, inner).tolist() == [-1, -1, 2]


def test_permutation_json():
    p = Permutation([2, 0, 1])
    assert Permutation.from_json(p.to_json()) == p
