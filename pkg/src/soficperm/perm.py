"""Permutations and sub-permutation (partial injection) matrices.

Points are 0-indexed.  A permutation ``a`` of degree ``d`` is stored as the
image array ``a.image[k]``.  Its permutation matrix has a 1 in position
``(a.image[k], k)``, so ``matrix(compose(a, b)) == matrix(a) @ matrix(b)``.

A :class:`SubPermMatrix` is stored the same way: ``image[col]`` is the row of
the single nonzero entry in that column, or ``-1`` for an empty column.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

EMPTY = -1


class DegreeMismatch(ValueError):
    pass


def _frozen(arr) -> np.ndarray:
    a = np.array(arr, dtype=np.int64)
    a.setflags(write=False)
    return a


class Permutation:
    """A bijection of ``{0, ..., d-1}``."""

    __slots__ = ("image",)

    def __init__(self, image: Iterable[int], check: bool = True):
        image = _frozen(list(image) if not isinstance(image, np.ndarray) else image)
        if image.ndim != 1 or image.size == 0:
            raise ValueError("permutation needs a non-empty 1-d image array")
        if check:
            seen = np.zeros(image.size, dtype=bool)
            if image.min() < 0 or image.max() >= image.size:
                raise ValueError("image out of range")
            seen[image] = True
            if not seen.all():
                raise ValueError("image is not a bijection")
        self.image = image

    @classmethod
    def identity(cls, d: int) -> "Permutation":
        return cls(np.arange(d), check=False)

    @classmethod
    def cycle(cls, d: int, shift: int = 1) -> "Permutation":
        """The shift ``k -> k + shift (mod d)``."""
        return cls((np.arange(d) + shift) % d, check=False)

    @property
    def degree(self) -> int:
        return int(self.image.size)

    def inverse(self) -> "Permutation":
        inv = np.empty_like(self.image)
        inv[self.image] = np.arange(self.degree)
        return Permutation(inv, check=False)

    def __call__(self, k: int) -> int:
        return int(self.image[k])

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def __eq__(self, other) -> bool:
        return isinstance(other, Permutation) and np.array_equal(self.image, other.image)

    def __hash__(self) -> int:
        return hash(self.image.tobytes())

    def __repr__(self) -> str:
        return f"Permutation({self.image.tolist()})"

    def fixed_points(self) -> int:
        return int(np.count_nonzero(self.image == np.arange(self.degree)))

    def to_matrix(self) -> "SubPermMatrix":
        return SubPermMatrix(self.degree, self.image, check=False)

    def to_json(self) -> list[int]:
        return self.image.tolist()

    @classmethod
    def from_json(cls, data: Sequence[int]) -> "Permutation":
        return cls(data)


def compose(a: Permutation, b: Permutation) -> Permutation:
    """``compose(a, b)[k] == a[b[k]]``."""
    if a.degree != b.degree:
        raise DegreeMismatch(f"degrees {a.degree} and {b.degree}")
    return Permutation(a.image[b.image], check=False)


def normalized_hamming(a: Permutation, b: Permutation) -> Fraction:
    """Fraction of points where ``a`` and ``b`` disagree.

    Equal to ``1 - tr_d(a^{-1} b)``.
    """
    if a.degree != b.degree:
        raise DegreeMismatch(f"degrees {a.degree} and {b.degree}")
    return Fraction(int(np.count_nonzero(a.image != b.image)), a.degree)


def dist_to_identity(a: Permutation) -> Fraction:
    return Fraction(a.degree - a.fixed_points(), a.degree)


class SubPermMatrix:
    """A d x d (0,1)-matrix with at most one nonzero per row and per column."""

    __slots__ = ("degree", "image")

    def __init__(self, degree: int, image: Iterable[int], check: bool = True):
        image = _frozen(list(image) if not isinstance(image, np.ndarray) else image)
        if image.shape != (degree,):
            raise ValueError(f"image must have length {degree}")
        if check:
            if image.size and (image.min() < EMPTY or image.max() >= degree):
                raise ValueError("row index out of range")
            rows = image[image != EMPTY]
            if np.unique(rows).size != rows.size:
                raise ValueError("a row holds more than one nonzero entry")
        self.degree = int(degree)
        self.image = image

    @classmethod
    def from_entries(cls, degree: int, entries: Iterable[tuple[int, int]]) -> "SubPermMatrix":
        image = np.full(degree, EMPTY, dtype=np.int64)
        for row, col in entries:
            if not (0 <= row < degree and 0 <= col < degree):
                raise ValueError(f"entry ({row}, {col}) out of range")
            if image[col] != EMPTY:
                raise ValueError(f"column {col} holds more than one nonzero entry")
            image[col] = row
        return cls(degree, image)

    @classmethod
    def identity(cls, d: int) -> "SubPermMatrix":
        return cls(d, np.arange(d), check=False)

    @classmethod
    def zero(cls, d: int) -> "SubPermMatrix":
        return cls(d, np.full(d, EMPTY), check=False)

    @classmethod
    def from_dense(cls, dense) -> "SubPermMatrix":
        dense = np.asarray(dense)
        rows, cols = np.nonzero(dense)
        if not np.all(dense[rows, cols] == 1):
            raise ValueError("entries must be 0 or 1")
        return cls.from_entries(dense.shape[0], zip(rows.tolist(), cols.tolist()))

    def entries(self) -> list[tuple[int, int]]:
        cols = np.flatnonzero(self.image != EMPTY)
        return [(int(self.image[c]), int(c)) for c in cols]

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.image != EMPTY))

    def is_permutation(self) -> bool:
        return self.nnz == self.degree

    def to_permutation(self) -> Permutation:
        if not self.is_permutation():
            raise ValueError("matrix is not a full permutation matrix")
        return Permutation(self.image, check=False)

    def transpose(self) -> "SubPermMatrix":
        out = np.full(self.degree, EMPTY, dtype=np.int64)
        cols = np.flatnonzero(self.image != EMPTY)
        out[self.image[cols]] = cols
        return SubPermMatrix(self.degree, out, check=False)

    def to_dense(self) -> np.ndarray:
        m = np.zeros((self.degree, self.degree), dtype=np.int64)
        for r, c in self.entries():
            m[r, c] = 1
        return m

    def diagonal_count(self) -> int:
        return int(np.count_nonzero(self.image == np.arange(self.degree)))

    def __matmul__(self, other: "SubPermMatrix") -> "SubPermMatrix":
        return multiply(self, other)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SubPermMatrix)
            and self.degree == other.degree
            and np.array_equal(self.image, other.image)
        )

    def __hash__(self) -> int:
        return hash((self.degree, self.image.tobytes()))

    def __repr__(self) -> str:
        return f"SubPermMatrix({self.degree}, {self.entries()})"

    def to_json(self) -> dict:
        return {"degree": self.degree, "entries": [list(e) for e in self.entries()]}

    @classmethod
    def from_json(cls, data) -> "SubPermMatrix":
        """Accepts ``{"degree", "entries"}`` or a bare permutation image list."""
        if isinstance(data, dict):
            return cls.from_entries(int(data["degree"]), [tuple(e) for e in data["entries"]])
        return Permutation.from_json(data).to_matrix()


def as_matrix(m) -> SubPermMatrix:
    return m.to_matrix() if isinstance(m, Permutation) else m


def multiply(a: SubPermMatrix, b: SubPermMatrix) -> SubPermMatrix:
    a, b = as_matrix(a), as_matrix(b)
    if a.degree != b.degree:
        raise DegreeMismatch(f"degrees {a.degree} and {b.degree}")
    return SubPermMatrix(a.degree, apply_partial(a.image, b.image), check=False)


def apply_partial(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Image array of ``outer o inner`` for partial maps encoded with ``EMPTY``."""
    out = np.full(inner.shape, EMPTY, dtype=np.int64)
    live = inner != EMPTY
    out[live] = outer[inner[live]]
    return out


def normalized_trace(m) -> Fraction:
    m = as_matrix(m)
    return Fraction(m.diagonal_count(), m.degree)
