"""Concrete finitely generated groups with canonical element forms.

Elements are plain hashable Python values so that equality is exact:

=================  ==========================================
group              element
=================  ==========================================
``CyclicGroup``    ``int`` in ``range(m)``
``Integers``       ``int``
``ZLattice``       ``tuple[int, ...]``
``SymmetricGroup`` ``tuple`` image of ``{0..k-1}``
``FreeGroup``      reduced ``tuple`` of nonzero ints, ``-i`` for ``x_i^{-1}``
=================  ==========================================
"""

from __future__ import annotations

import itertools
import re
from abc import ABC, abstractmethod
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

Element = Hashable

_TOKEN = re.compile(r"^x(\d+)(?:\^(-?\d+))?$")


def parse_word(text: str) -> list[tuple[int, int]]:
    """``"x1 x2^-1 x1^2"`` -> ``[(1, 1), (2, -1), (1, 1), (1, 1)]``."""
    letters = []
    for tok in text.replace("*", " ").split():
        if tok in ("e", "1"):
            continue
        m = _TOKEN.match(tok)
        if not m:
            raise ValueError(f"bad token {tok!r} in word {text!r}")
        gen, exp = int(m.group(1)), int(m.group(2) or 1)
        if gen < 1:
            raise ValueError("generators are numbered from 1")
        letters += [(gen, 1 if exp > 0 else -1)] * abs(exp)
    return letters


def free_reduce(letters: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    out: list[tuple[int, int]] = []
    for gen, exp in letters:
        if out and out[-1] == (gen, -exp):
            out.pop()
        else:
            out.append((gen, exp))
    return tuple(out)


class GroupHandle(ABC):
    """Interface shared by the supported groups."""

    is_finite = False
    is_abelian = False

    @property
    @abstractmethod
    def identity(self) -> Element: ...

    @abstractmethod
    def multiply(self, a: Element, b: Element) -> Element: ...

    @abstractmethod
    def inverse(self, a: Element) -> Element: ...

    @property
    @abstractmethod
    def generators(self) -> list[Element]: ...

    @abstractmethod
    def descriptor(self) -> dict: ...

    def product(self, *elems: Element) -> Element:
        out = self.identity
        for g in elems:
            out = self.multiply(out, g)
        return out

    def power(self, g: Element, k: int) -> Element:
        base = g if k >= 0 else self.inverse(g)
        out = self.identity
        for _ in range(abs(k)):
            out = self.multiply(out, base)
        return out

    def evaluate(self, letters: Sequence[tuple[int, int]]) -> Element:
        gens = self.generators
        out = self.identity
        for gen, exp in letters:
            if gen > len(gens):
                raise ValueError(f"x{gen} is not a generator of {self}")
            out = self.multiply(out, self.power(gens[gen - 1], exp))
        return out

    def ball(self, radius: int) -> list[Element]:
        """Elements of word length ``<= radius``, in breadth-first order."""
        steps = self.generators + [self.inverse(g) for g in self.generators]
        seen = {self.identity: None}
        frontier = [self.identity]
        for _ in range(radius):
            nxt = []
            for g in frontier:
                for s in steps:
                    h = self.multiply(g, s)
                    if h not in seen:
                        seen[h] = None
                        nxt.append(h)
            frontier = nxt
        return list(seen)

    def elements(self) -> list[Element]:
        raise TypeError(f"{self} is infinite")

    def key(self, g: Element) -> Any:
        """Total order used to pick canonical representatives."""
        return g

    def contains(self, g: Element) -> bool:
        return True

    def to_json(self, g: Element) -> Any:
        return list(g) if isinstance(g, tuple) else g

    def from_json(self, data: Any) -> Element:
        if isinstance(data, str):
            return self.evaluate(parse_word(data))
        g = tuple(data) if isinstance(data, list) else data
        if not self.contains(g):
            raise ValueError(f"{data!r} is not an element of {self}")
        return g

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.descriptor()})"

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupHandle) and self.descriptor() == other.descriptor()

    def __hash__(self) -> int:
        return hash(repr(self))


class CyclicGroup(GroupHandle):
    is_finite = True
    is_abelian = True

    def __init__(self, order: int):
        if order < 1:
            raise ValueError("order must be positive")
        self.order = order

    identity = 0

    def multiply(self, a, b):
        return (a + b) % self.order

    def inverse(self, a):
        return (-a) % self.order

    @property
    def generators(self):
        return [1 % self.order] if self.order > 1 else []

    def elements(self):
        return list(range(self.order))

    def contains(self, g):
        return isinstance(g, int) and 0 <= g < self.order

    def descriptor(self):
        return {"type": "cyclic", "order": self.order}


class Integers(GroupHandle):
    is_abelian = True
    identity = 0

    def multiply(self, a, b):
        return a + b

    def inverse(self, a):
        return -a

    @property
    def generators(self):
        return [1]

    def ball(self, radius):
        return sorted(range(-radius, radius + 1), key=lambda k: (abs(k), k))

    def contains(self, g):
        return isinstance(g, int)

    def descriptor(self):
        return {"type": "integers"}


class ZLattice(GroupHandle):
    """``Z^rank`` with the standard basis as generators."""

    is_abelian = True

    def __init__(self, rank: int):
        if rank < 1:
            raise ValueError("rank must be positive")
        self.rank = rank

    @property
    def identity(self):
        return (0,) * self.rank

    def multiply(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def inverse(self, a):
        return tuple(-x for x in a)

    @property
    def generators(self):
        return [tuple(int(i == j) for j in range(self.rank)) for i in range(self.rank)]

    def ball(self, radius):
        pts = [v for v in itertools.product(range(-radius, radius + 1), repeat=self.rank)
               if sum(map(abs, v)) <= radius]
        return sorted(pts, key=lambda v: (sum(map(abs, v)), v))

    def box(self, half_width: int) -> list[tuple[int, ...]]:
        return list(itertools.product(range(-half_width, half_width + 1), repeat=self.rank))

    def contains(self, g):
        return isinstance(g, tuple) and len(g) == self.rank and all(isinstance(x, int) for x in g)

    def descriptor(self):
        return {"type": "lattice", "rank": self.rank}


class SymmetricGroup(GroupHandle):
    """``S_k`` acting on ``{0..k-1}``, generated by a transposition and a k-cycle."""

    is_finite = True

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be positive")
        self.k = k

    @property
    def identity(self):
        return tuple(range(self.k))

    def multiply(self, a, b):
        return tuple(a[i] for i in b)

    def inverse(self, a):
        inv = [0] * self.k
        for i, ai in enumerate(a):
            inv[ai] = i
        return tuple(inv)

    @property
    def generators(self):
        if self.k < 2:
            return []
        swap = (1, 0) + tuple(range(2, self.k))
        cyc = tuple((i + 1) % self.k for i in range(self.k))
        return [swap] if self.k == 2 else [swap, cyc]

    def elements(self):
        return list(itertools.permutations(range(self.k)))

    def contains(self, g):
        return isinstance(g, tuple) and sorted(g) == list(range(self.k))

    def descriptor(self):
        return {"type": "symmetric", "k": self.k}


class FreeGroup(GroupHandle):
    def __init__(self, rank: int):
        if rank < 1:
            raise ValueError("rank must be positive")
        self.rank = rank

    identity = ()

    @staticmethod
    def _letters(g):
        return [(abs(x), 1 if x > 0 else -1) for x in g]

    @staticmethod
    def _pack(letters):
        return tuple(gen * exp for gen, exp in free_reduce(letters))

    def multiply(self, a, b):
        return self._pack(self._letters(a) + self._letters(b))

    def inverse(self, a):
        return tuple(-x for x in reversed(a))

    @property
    def generators(self):
        return [(i,) for i in range(1, self.rank + 1)]

    def key(self, g):
        return (len(g), g)

    def contains(self, g):
        return (isinstance(g, tuple) and all(isinstance(x, int) and 0 < abs(x) <= self.rank for x in g)
                and self._pack(self._letters(g)) == g)

    def format(self, g) -> str:
        return " ".join(f"x{abs(x)}" + ("^-1" if x < 0 else "") for x in g) or "e"

    def descriptor(self):
        return {"type": "free", "rank": self.rank}


def group_from_descriptor(desc: dict) -> GroupHandle:
    kind = desc.get("type")
    if kind == "cyclic":
        return CyclicGroup(int(desc["order"]))
    if kind == "trivial":
        return CyclicGroup(1)
    if kind == "integers":
        return Integers()
    if kind == "lattice":
        return ZLattice(int(desc["rank"]))
    if kind == "symmetric":
        return SymmetricGroup(int(desc["k"]))
    if kind == "free":
        return FreeGroup(int(desc["rank"]))
    raise ValueError(f"unsupported group descriptor {desc!r}")


class Embedding:
    """Injective homomorphism of a cyclic/free-abelian group into another group,
    fixed by the images of the generators."""

    def __init__(self, source: GroupHandle, target: GroupHandle, generator_images: Sequence[Element]):
        if not isinstance(source, (CyclicGroup, Integers, ZLattice)):
            raise TypeError("embeddings are supported from cyclic and free abelian groups")
        if len(generator_images) != len(source.generators):
            raise ValueError("one image per generator required")
        self.source, self.target = source, target
        self.images = list(generator_images)

    @classmethod
    def trivial(cls, target: GroupHandle) -> "Embedding":
        return cls(CyclicGroup(1), target, [])

    def __call__(self, h: Element) -> Element:
        src, tgt = self.source, self.target
        if isinstance(src, ZLattice):
            coords = h
        elif isinstance(src, CyclicGroup) and src.order == 1:
            return tgt.identity
        else:
            coords = (h,)
        return tgt.product(*(tgt.power(img, c) for img, c in zip(self.images, coords)))

    def image_set(self) -> dict:
        """``{embedded element: source element}`` for a finite source."""
        return {self(h): h for h in self.source.elements()}

    def preimage(self, g: Element):
        """The source element mapping to ``g``, or ``None`` when ``g`` is outside the image."""
        src = self.source
        if src.is_finite:
            if not hasattr(self, "_inverse_table"):
                self._inverse_table = self.image_set()
            return self._inverse_table.get(g)
        if not isinstance(self.target, (Integers, ZLattice)):
            raise TypeError("preimages from an infinite source need an abelian target")
        vecs = [img if isinstance(img, tuple) else (img,) for img in self.images]
        target = g if isinstance(g, tuple) else (g,)
        coeffs = np.linalg.lstsq(np.array(vecs, dtype=float).T, np.array(target, dtype=float), rcond=None)[0]
        h = tuple(int(round(c)) for c in coeffs)
        h = h if isinstance(src, ZLattice) else h[0]
        return h if self(h) == g else None

    def contains_image(self, g: Element) -> bool:
        return self.preimage(g) is not None
