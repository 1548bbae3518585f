"""Mating selection and bit-string variation.

Every operator draws from an explicit :class:`numpy.random.Generator`.  The
jitted kernels advance the same generator state as NumPy does, so calling an
operator from Python or from inside the compiled engine loop consumes the
stream identically.
"""

from __future__ import annotations

import numba
import numpy as np

__all__ = [
    "bit_flip_mutation",
    "mating_select",
    "two_point_crossover",
]


@numba.njit(cache=True)
def _pick_mate(neighbors, rng):
    return neighbors[rng.integers(0, neighbors.shape[0])]


@numba.njit(cache=True)
def _draw_cuts(n, rng):
    # uniform over the (n+1)(n+2)/2 pairs 0 <= a <= b <= n
    u = rng.integers(0, (n + 1) * (n + 2) // 2)
    b = np.int64((np.sqrt(8.0 * u + 1.0) - 1.0) / 2.0)
    while b * (b + 1) // 2 > u:
        b -= 1
    while (b + 1) * (b + 2) // 2 <= u:
        b += 1
    return u - b * (b + 1) // 2, b


@numba.njit(cache=True)
def _crossover_into(p1, p2, rng, child):
    n = p1.shape[0]
    a, b = _draw_cuts(n, rng)
    if rng.integers(0, 2) == 1:
        p1, p2 = p2, p1
    for i in range(n):
        child[i] = p2[i] if a <= i < b else p1[i]


@numba.njit(cache=True)
def _mutate_inplace(x, rate, rng):
    for i in range(x.shape[0]):
        if rng.random() < rate:
            x[i] ^= 1


def mating_select(i: int, neighbors: np.ndarray, population: np.ndarray, rng: np.random.Generator):
    """Return ``(population[i], population[k])`` with ``k`` uniform over ``neighbors``."""
    neighbors = np.asarray(neighbors, dtype=np.int64)
    if neighbors.size == 0:
        raise ValueError("empty neighborhood")
    k = _pick_mate(neighbors, rng)
    return population[i], population[k]


def two_point_crossover(p1: np.ndarray, p2: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One child of two-point crossover.

    Cut points ``a <= b`` are uniform over all ordered pairs in ``[0, N]``;
    with probability 1/2 the child takes ``p2`` inside ``[a, b)`` and ``p1``
    outside, otherwise the converse.
    """
    p1 = np.asarray(p1, dtype=np.uint8)
    p2 = np.asarray(p2, dtype=np.uint8)
    if p1.shape != p2.shape:
        raise ValueError(f"parent lengths differ: {p1.shape} vs {p2.shape}")
    child = np.empty_like(p1)
    _crossover_into(p1, p2, rng, child)
    return child


def bit_flip_mutation(x: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"mutation rate must lie in [0, 1], got {rate}")
    out = np.array(x, dtype=np.uint8)
    _mutate_inplace(out, float(rate), rng)
    return out
