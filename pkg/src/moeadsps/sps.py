"""Sub-problem selection strategies: ALL, RND and DRA.

``lam`` always counts the total number of sub-problems processed in one
generation, boundary sub-problems included, so a generation costs exactly
``lam`` evaluations.  When ``lam`` is at least the number of boundary indices
every boundary sub-problem is selected first; otherwise ``lam`` of them are
taken in round-robin order driven by the generation counter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numba
import numpy as np

__all__ = [
    "STRATEGIES",
    "SpsHistory",
    "select",
    "select_all",
    "select_dra",
    "select_rnd",
    "update_utilities",
]

STRATEGIES = ("all", "rnd", "dra")

TOURNAMENT_SIZE = 10
UTILITY_THRESHOLD = 0.001
UTILITY_DECAY = 0.95
UPDATE_INTERVAL = 50
# keeps utilities strictly positive after very long stagnation
_UTILITY_FLOOR = np.finfo(np.float64).tiny


@dataclass
class SpsHistory:
    """DRA bookkeeping: one utility and one scalarized snapshot per sub-problem."""

    utilities: np.ndarray
    snapshot_g: np.ndarray
    generation: int = 0
    update_interval: int = UPDATE_INTERVAL
    threshold: float = UTILITY_THRESHOLD
    decay: float = UTILITY_DECAY

    @classmethod
    def start(cls, initial_g, **params) -> "SpsHistory":
        initial_g = np.array(initial_g, dtype=np.float64)
        return cls(np.ones_like(initial_g), initial_g, **params)

    def copy(self) -> "SpsHistory":
        return replace(self, utilities=self.utilities.copy(), snapshot_g=self.snapshot_g.copy())


@numba.njit(cache=True)
def _fill_boundary(lam, boundary, generation, out):
    nb = boundary.shape[0]
    if lam >= nb:
        for j in range(nb):
            out[j] = boundary[j]
        return nb
    for j in range(lam):
        out[j] = boundary[(generation * lam + j) % nb]
    return lam


@numba.njit(cache=True)
def _others(mu, boundary):
    mask = np.ones(mu, dtype=np.bool_)
    for b in boundary:
        mask[b] = False
    return np.nonzero(mask)[0]


@numba.njit(cache=True)
def _select_rnd(mu, lam, boundary, generation, rng, out):
    c = _fill_boundary(lam, boundary, generation, out)
    if c < lam:
        pool = _others(mu, boundary)
        size = pool.shape[0]
        for t in range(lam - c):
            j = t + rng.integers(0, size - t)
            pool[t], pool[j] = pool[j], pool[t]
            out[c + t] = pool[t]


@numba.njit(cache=True)
def _select_dra(utilities, mu, lam, boundary, generation, tournament, rng, out):
    c = _fill_boundary(lam, boundary, generation, out)
    if c >= lam:
        return
    pool = _others(mu, boundary)
    size = pool.shape[0]
    while c < lam:
        k = min(tournament, size)
        for t in range(k):
            j = t + rng.integers(0, size - t)
            pool[t], pool[j] = pool[j], pool[t]
        winner = 0
        best = utilities[pool[0]]
        ties = 1
        for t in range(1, k):
            u = utilities[pool[t]]
            if u > best:
                best = u
                winner = t
                ties = 1
            elif u == best:
                ties += 1
                if rng.integers(0, ties) == 0:
                    winner = t
        out[c] = pool[winner]
        c += 1
        size -= 1
        pool[winner] = pool[size]


@numba.njit(cache=True)
def _update_utilities(utilities, snapshot, current_g, generation, interval, threshold, decay):
    if generation % interval != 0:
        return
    for i in range(utilities.shape[0]):
        old = snapshot[i]
        delta = (old - current_g[i]) / old if old != 0.0 else 0.0
        if delta > threshold:
            utilities[i] = 1.0
        else:
            # moves of the reference point can raise g; count that as no progress
            if delta < 0.0:
                delta = 0.0
            utilities[i] = max((decay + (1.0 - decay) * delta / threshold) * utilities[i], _UTILITY_FLOOR)
        snapshot[i] = current_g[i]


def _check_lambda(mu: int, lam: int) -> None:
    if not 1 <= lam <= mu:
        raise ValueError(f"lambda must satisfy 1 <= lambda <= mu={mu}, got {lam}")


def select_all(mu: int) -> np.ndarray:
    return np.arange(mu, dtype=np.int64)


def select_rnd(mu: int, lam: int, boundary_indices, rng: np.random.Generator, generation: int = 0) -> np.ndarray:
    """Boundary sub-problems plus ``lam - M`` others uniformly without replacement."""
    _check_lambda(mu, lam)
    out = np.empty(lam, dtype=np.int64)
    _select_rnd(mu, lam, np.asarray(boundary_indices, dtype=np.int64), generation, rng, out)
    return out


def select_dra(
    history: SpsHistory,
    mu: int,
    lam: int,
    boundary_indices,
    rng: np.random.Generator,
    generation: int | None = None,
    tournament_size: int = TOURNAMENT_SIZE,
) -> np.ndarray:
    """Boundary sub-problems plus utility tournaments over the remaining pool.

    Each free slot runs a tournament among up to ``tournament_size`` distinct
    candidates drawn from the not-yet-selected non-boundary sub-problems; the
    highest utility wins, ties broken uniformly at random.
    """
    _check_lambda(mu, lam)
    if generation is None:
        generation = history.generation
    out = np.empty(lam, dtype=np.int64)
    _select_dra(
        history.utilities, mu, lam, np.asarray(boundary_indices, dtype=np.int64),
        generation, tournament_size, rng, out,
    )
    return out


def select(name: str, mu: int, lam: int, boundary_indices, rng, history: SpsHistory | None = None,
           generation: int = 0) -> np.ndarray:
    if name == "all":
        return select_all(mu)
    if name == "rnd":
        return select_rnd(mu, lam, boundary_indices, rng, generation)
    if name == "dra":
        if history is None:
            raise ValueError("the dra strategy needs a search history")
        return select_dra(history, mu, lam, boundary_indices, rng, generation)
    raise ValueError(f"unknown strategy {name!r}; expected one of {STRATEGIES}")


def update_utilities(history: SpsHistory, current_g) -> SpsHistory:
    """Advance the generation counter and refresh utilities on window boundaries.

    Returns a new history; the argument is left untouched.
    """
    new = history.copy()
    new.generation += 1
    _update_utilities(
        new.utilities, new.snapshot_g, np.asarray(current_g, dtype=np.float64),
        new.generation, new.update_interval, new.threshold, new.decay,
    )
    return new
