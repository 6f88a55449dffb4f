"""Shared hypothesis strategies."""

from hypothesis import strategies as st

from soficperm.partitions import Partition
from soficperm.perm import Permutation, SubPermMatrix


@st.composite
def permutations(draw, d=None, max_d=9):
    d = d if d is not None else draw(st.integers(1, max_d))
    return Permutation(draw(st.permutations(range(d))))


@st.composite
def perm_pairs(draw, count=2, max_d=9):
    d = draw(st.integers(1, max_d))
    return [draw(permutations(d)) for _ in range(count)]


@st.composite
def subperms(draw, d):
    image = list(draw(st.permutations(range(d))))
    mask = draw(st.lists(st.booleans(), min_size=d, max_size=d))
    return SubPermMatrix(d, [x if keep else -1 for x, keep in zip(image, mask)])


@st.composite
def partitions(draw, m=None, max_m=8):
    m = m if m is not None else draw(st.integers(1, max_m))
    return Partition.from_labels(draw(st.lists(st.integers(0, m - 1), min_size=m, max_size=m)))


@st.composite
def partition_pairs(draw, count=2, max_m=8):
    m = draw(st.integers(1, max_m))
    return [draw(partitions(m)) for _ in range(count)]
