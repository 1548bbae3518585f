"""Dominance, exact hypervolume, hvrd and rank-sum comparisons.

All objectives are maximized and the hypervolume reference point is the
origin.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numba
import numpy as np
from scipy.stats import rankdata

__all__ = [
    "ComparisonResult",
    "aggregate_reference",
    "dominates",
    "hvrd",
    "hypervolume",
    "pareto_filter",
    "rank_table",
    "read_front_csv",
    "wilcoxon_rank_sum",
    "write_front_csv",
]


def dominates(a, b) -> bool:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a >= b) and np.any(a > b))


@numba.njit(cache=True)
def _covered(points, kept, n_kept, p):
    # True if some kept point weakly dominates p
    M = points.shape[1]
    for t in range(n_kept):
        q = points[kept[t]]
        ok = True
        for m in range(M):
            if q[m] < p[m]:
                ok = False
                break
        if ok:
            return True
    return False


@numba.njit(cache=True)
def _filter_kernel(points, order):
    kept = np.empty(points.shape[0], dtype=np.int64)
    n_kept = 0
    for idx in order:
        if not _covered(points, kept, n_kept, points[idx]):
            kept[n_kept] = idx
            n_kept += 1
    return kept[:n_kept]


def _nondominated_indices(points: np.ndarray) -> np.ndarray:
    if points.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    # a point can only be weakly dominated by one with an equal or larger sum
    order = np.lexsort((np.arange(points.shape[0]), -points.sum(axis=1)))
    return np.sort(_filter_kernel(points, order.astype(np.int64)))


def pareto_filter(points) -> np.ndarray:
    """Mutually non-dominated subset, duplicates collapsed, in input order."""
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        return points.reshape(0, points.shape[-1] if points.ndim == 2 else 0)
    return points[_nondominated_indices(points)]


def aggregate_reference(archives: Iterable) -> np.ndarray:
    """Non-dominated union of several fronts."""
    parts = [np.asarray(a, dtype=np.float64) for a in archives]
    parts = [p for p in parts if p.size]
    if not parts:
        return np.empty((0, 0))
    return pareto_filter(np.vstack(parts))


def _hv2d(points: np.ndarray) -> float:
    order = np.argsort(-points[:, 0], kind="stable")
    x = points[order, 0]
    y = np.maximum.accumulate(points[order, 1])
    steps = np.diff(np.concatenate(([0.0], y)))
    return float(np.sum(x * steps))


@numba.njit(cache=True)
def _hv3d(points):
    # slice on the last objective, sweep the (x, y) staircase of each slice
    n = points.shape[0]
    by_z = np.argsort(-points[:, 2], kind="mergesort")
    rank = np.empty(n, dtype=np.int64)
    for r in range(n):
        rank[by_z[r]] = r
    by_x = np.argsort(-points[:, 0], kind="mergesort")
    volume = 0.0
    for k in range(n):
        z_hi = points[by_z[k], 2]
        z_lo = points[by_z[k + 1], 2] if k + 1 < n else 0.0
        if z_hi == z_lo:
            continue
        area = 0.0
        ymax = 0.0
        for t in range(n):
            i = by_x[t]
            if rank[i] <= k and points[i, 1] > ymax:
                area += points[i, 0] * (points[i, 1] - ymax)
                ymax = points[i, 1]
        volume += area * (z_hi - z_lo)
    return volume


def _hv(points: np.ndarray) -> float:
    M = points.shape[1]
    if points.shape[0] == 0:
        return 0.0
    if M == 1:
        return float(points[:, 0].max())
    if M == 2:
        return _hv2d(points)
    if M == 3:
        return float(_hv3d(np.ascontiguousarray(points)))
    order = np.argsort(-points[:, -1], kind="stable")
    pts = points[order]
    volume = 0.0
    for k in range(pts.shape[0]):
        z_hi = pts[k, -1]
        z_lo = pts[k + 1, -1] if k + 1 < pts.shape[0] else 0.0
        if z_hi > z_lo:
            volume += _hv(pareto_filter(pts[: k + 1, :-1])) * (z_hi - z_lo)
    return volume


def hypervolume(front, M: int | None = None, trusted: bool = False) -> float:
    """Exact volume dominated by ``front`` with respect to the origin.

    Slices on the last objective and recurses; two objectives are handled by a
    single sorted sweep.  Dominated points are filtered out first unless
    ``trusted`` says the input is already mutually non-dominated.
    """
    pts = np.asarray(front, dtype=np.float64)
    if pts.size == 0:
        return 0.0
    if pts.ndim != 2:
        raise ValueError(f"front must be a 2-D array, got shape {pts.shape}")
    if M is not None and pts.shape[1] != M:
        raise ValueError(f"front has {pts.shape[1]} objectives, expected {M}")
    if np.any(pts < 0) or not np.all(np.isfinite(pts)):
        raise ValueError("hypervolume needs finite, non-negative objective values")
    pts = pts[np.all(pts > 0, axis=1)]
    if pts.shape[0] == 0:
        return 0.0
    return _hv(pts if trusted else pareto_filter(pts))


def hvrd(approximation, reference) -> float:
    """Hypervolume relative deviation ``(hv(R) - hv(A)) / hv(R)``; lower is better."""
    hv_ref = reference if isinstance(reference, float) else hypervolume(reference)
    if hv_ref <= 0.0:
        raise ValueError("reference front has zero hypervolume")
    hv_a = approximation if isinstance(approximation, float) else hypervolume(approximation)
    return (hv_ref - hv_a) / hv_ref


@dataclass(frozen=True)
class ComparisonResult:
    statistic: float
    p_value: float
    significant: bool


def _u_statistic(ranks: np.ndarray, n1: int) -> float:
    return float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)


def _exact_p(pooled_ranks: np.ndarray, n1: int, u_obs: float) -> float:
    n = pooled_ranks.shape[0]
    if math.comb(n, n1) > 2_000_000:
        raise ValueError("exact rank-sum enumeration is limited to small samples")
    offset = n1 * (n1 + 1) / 2.0
    lo = hi = total = 0
    for subset in combinations(range(n), n1):
        u = float(pooled_ranks[list(subset)].sum()) - offset
        total += 1
        lo += u <= u_obs + 1e-9
        hi += u >= u_obs - 1e-9
    return float(min(1.0, 2.0 * min(lo, hi) / total))


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float], alpha: float = 0.05,
                      method: str = "normal") -> ComparisonResult:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney) test.

    The default ``"normal"`` method uses mid-ranks for ties and the
    tie-corrected normal approximation with continuity correction.
    ``"exact"`` enumerates every assignment of the pooled ranks and is meant
    for small samples.  ``statistic`` is the U statistic of ``a``.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    n1, n2 = a.size, b.size
    if n1 < 1 or n2 < 1:
        raise ValueError("both samples need at least one value")
    ranks = rankdata(np.concatenate([a, b]))
    u1 = _u_statistic(ranks, n1)
    if method == "exact":
        p = _exact_p(ranks, n1, u1)
    elif method == "normal":
        n = n1 + n2
        _, counts = np.unique(ranks, return_counts=True)
        ties = float(np.sum(counts**3 - counts))
        var = n1 * n2 / 12.0 * ((n + 1) - (ties / (n * (n - 1)) if n > 1 else 0.0))
        if var <= 0.0:
            p = 1.0
        else:
            z = max(abs(u1 - n1 * n2 / 2.0) - 0.5, 0.0) / math.sqrt(var)
            p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    else:
        raise ValueError(f"unknown method {method!r}")
    return ComparisonResult(u1, p, p < alpha)


def rank_table(samples: Mapping[str, Sequence[float]], alpha: float = 0.05) -> dict[str, int]:
    """Number of other strategies that significantly outperform each strategy.

    Values are losses (lower is better).  ``t`` outperforms ``s`` when the
    rank-sum test is significant and ``t`` holds the lower mean rank.
    """
    names = list(samples)
    if len(names) < 2:
        raise ValueError("rank_table needs at least two strategies")
    ranks = {name: 0 for name in names}
    for s, t in combinations(names, 2):
        res = wilcoxon_rank_sum(samples[s], samples[t], alpha)
        if not res.significant:
            continue
        n_s, n_t = len(samples[s]), len(samples[t])
        if res.statistic < n_s * n_t / 2.0:
            ranks[t] += 1
        elif res.statistic > n_s * n_t / 2.0:
            ranks[s] += 1
    return ranks


def write_front_csv(path, points, genotypes: Sequence[str] | None = None) -> None:
    """One objective vector per row (``f1..fM``), optional ``genotype`` hex column."""
    points = np.asarray(points, dtype=np.float64)
    M = points.shape[1] if points.ndim == 2 else 0
    header = [f"f{m + 1}" for m in range(M)] + (["genotype"] if genotypes is not None else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r, row in enumerate(points):
            cells = [repr(float(v)) for v in row]
            if genotypes is not None:
                cells.append(genotypes[r])
            writer.writerow(cells)


def read_front_csv(path) -> tuple[np.ndarray, list[str] | None]:
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty front file") from None
        has_geno = bool(header) and header[-1] == "genotype"
        M = len(header) - int(has_geno)
        values, genos = [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            values.append([float(v) for v in row[:M]])
            if has_geno:
                genos.append(row[-1])
    arr = np.asarray(values, dtype=np.float64).reshape(len(values), M)
    return arr, (genos if has_geno else None)
