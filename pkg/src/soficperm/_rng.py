"""Seed derivation and sample-parallel map.

Every random draw comes from a Philox stream keyed by a path of integers
``(master_seed, tag, ..., index)``, so results depend only on the path and
never on worker count or scheduling.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np


def tag(name: str) -> int:
    return zlib.crc32(name.encode())


def stream(seed: int, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, path)])))


def seed_label(seed: int, *path) -> str:
    return ":".join(str(p) for p in (seed, *path))


def uniform_permutation(rng: np.random.Generator, d: int) -> np.ndarray:
    return rng.permutation(d)


def map_samples(fn: Callable[[int], float], count: int, workers: int = 1) -> np.ndarray:
    """Evaluate ``fn(i)`` for ``i < count``; output order is index order."""
    if workers <= 1 or count < 2 * workers:
        return np.array([fn(i) for i in range(count)], dtype=np.float64)
    chunks = np.array_split(np.arange(count), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda idx: [fn(int(i)) for i in idx], chunks))
    return np.array([v for part in parts for v in part], dtype=np.float64)


def mean_and_stderr(values: Sequence[float]) -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("no samples")
    mean = float(np.mean(values))
    if values.size == 1:
        return mean, 0.0
    return mean, float(np.std(values) / np.sqrt(values.size))
