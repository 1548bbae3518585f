"""Weight vectors, Chebyshev scalarization, neighborhoods and the reference point.

Sub-problem indices are 0-based.  Objectives are maximized; the reference
point ``z`` sits strictly above every objective vector seen so far and the
Chebyshev value ``max_m w_m * |z_m - f_m|`` is minimized.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from itertools import combinations

import numba
import numpy as np
from scipy.stats import qmc

__all__ = [
    "REFERENCE_EPS",
    "WeightSet",
    "build_neighborhoods",
    "chebyshev",
    "format_weights",
    "generate_weights",
    "init_reference",
    "neighborhood_size",
    "parse_weights",
    "update_reference",
]

# Additive offset keeping z strictly above every seen objective value.
REFERENCE_EPS = 1e-6

_SOBOL_SEED = 20200905


@dataclass(frozen=True, eq=False)
class WeightSet:
    """``vectors`` has shape ``(mu, M)``; ``boundary_indices`` lists the
    distinct maximizers of each component (length ``M`` unless ``mu < M``)."""

    vectors: np.ndarray
    boundary_indices: np.ndarray

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def M(self) -> int:
        return self.vectors.shape[1]


def _lattice(H: int, M: int) -> np.ndarray:
    # stars and bars: each (M-1)-subset of H+M-1 slots gives one composition of H
    points = []
    for bars in combinations(range(H + M - 1), M - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(H + M - 1 - prev - 1)
        points.append(parts)
    return np.asarray(points, dtype=np.float64)[::-1] / H


def _simplex_sobol(n: int, M: int) -> np.ndarray:
    """``n`` scrambled Sobol points mapped onto the unit simplex by sorted spacings."""
    if n <= 0:
        return np.empty((0, M))
    sampler = qmc.Sobol(d=M - 1, scramble=True, seed=_SOBOL_SEED)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        u = sampler.random(n)
    u = np.sort(u, axis=1)
    edges = np.hstack([np.zeros((n, 1)), u, np.ones((n, 1))])
    return np.diff(edges, axis=1)


def _boundary_indices(vectors: np.ndarray) -> np.ndarray:
    found: list[int] = []
    for m in range(vectors.shape[1]):
        idx = int(np.argmax(vectors[:, m]))
        if idx not in found:
            found.append(idx)
    return np.asarray(found, dtype=np.int64)


def generate_weights(mu: int, M: int, method: str | None = None) -> WeightSet:
    """Generate ``mu`` weight vectors on the unit simplex.

    ``"lattice"`` takes the simplex lattice with the largest ``H`` such that
    ``C(H+M-1, M-1) <= mu`` and tops it up with low-discrepancy points.
    ``"lowdisc"`` places the ``M`` axis vectors first (when ``mu >= M``) and
    fills the rest with scrambled Sobol points mapped to the simplex.  The
    default is ``"lattice"`` for ``M <= 2`` and ``"lowdisc"`` otherwise.  A
    single vector (``mu == 1``) is always the simplex centroid.
    """
    if mu < 1 or M < 1:
        raise ValueError(f"mu and M must be >= 1, got mu={mu}, M={M}")
    if method is None:
        method = "lattice" if M <= 2 else "lowdisc"
    if method not in ("lattice", "lowdisc"):
        raise ValueError(f"unknown weight method {method!r}")

    if M == 1:
        vectors = np.ones((mu, 1))
    elif mu == 1:
        vectors = np.full((1, M), 1.0 / M)
    elif method == "lattice":
        H = 0
        while math.comb(H + 1 + M - 1, M - 1) <= mu:
            H += 1
        lattice = _lattice(H, M) if H >= 1 else np.empty((0, M))
        vectors = np.vstack([lattice, _simplex_sobol(mu - len(lattice), M)])
    else:
        axes = np.eye(M) if mu >= M else np.empty((0, M))
        vectors = np.vstack([axes, _simplex_sobol(mu - len(axes), M)])

    vectors = np.ascontiguousarray(vectors, dtype=np.float64)
    vectors.setflags(write=False)
    return WeightSet(vectors, _boundary_indices(vectors))


def format_weights(weights: WeightSet) -> str:
    """One vector per line, space-separated, full precision."""
    return "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in weights.vectors)


def parse_weights(text: str) -> WeightSet:
    rows = [list(map(float, line.split())) for line in text.splitlines() if line.strip()]
    vectors = np.asarray(rows, dtype=np.float64)
    if vectors.ndim != 2 or vectors.size == 0:
        raise ValueError("weight text must contain at least one row of equal-length vectors")
    return WeightSet(vectors, _boundary_indices(vectors))


@numba.njit(cache=True)
def _chebyshev(f, w, z):
    best = 0.0
    for m in range(f.shape[0]):
        v = w[m] * abs(z[m] - f[m])
        if v > best:
            best = v
    return best


def chebyshev(f, w, z) -> float:
    f = np.asarray(f, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if not (f.shape == w.shape == z.shape) or f.ndim != 1:
        raise ValueError(f"dimension mismatch: f{f.shape}, w{w.shape}, z{z.shape}")
    return float(_chebyshev(f, w, z))


def neighborhood_size(mu: int, fraction: float = 0.2) -> int:
    return max(1, int(round(fraction * mu)))


def build_neighborhoods(weights: WeightSet | np.ndarray, T: int) -> np.ndarray:
    """Indices of the ``T`` nearest weight vectors for every sub-problem.

    Row ``j`` starts with ``j`` itself, then the others by increasing Euclidean
    distance, ties broken by lower index.
    """
    vectors = weights.vectors if isinstance(weights, WeightSet) else np.asarray(weights, dtype=np.float64)
    mu = vectors.shape[0]
    if not 1 <= T <= mu:
        raise ValueError(f"T must satisfy 1 <= T <= mu={mu}, got {T}")
    diff = vectors[:, None, :] - vectors[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(dist, -1.0)
    table = np.argsort(dist, axis=1, kind="stable")[:, :T]
    table = np.ascontiguousarray(table, dtype=np.int64)
    table.setflags(write=False)
    return table


def init_reference(objectives) -> np.ndarray:
    objectives = np.asarray(objectives, dtype=np.float64)
    if objectives.ndim != 2 or objectives.shape[0] == 0:
        raise ValueError("cannot initialize a reference point from an empty population")
    return objectives.max(axis=0) + REFERENCE_EPS


@numba.njit(cache=True)
def _update_reference(z, f):
    for m in range(z.shape[0]):
        candidate = f[m] + REFERENCE_EPS
        if candidate > z[m]:
            z[m] = candidate


def update_reference(z, f) -> np.ndarray:
    """Return ``max(z, f + eps)`` componentwise; ``z`` is not modified."""
    z = np.array(z, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if z.shape != f.shape:
        raise ValueError(f"dimension mismatch: z{z.shape}, f{f.shape}")
    _update_reference(z, f)
    return z
