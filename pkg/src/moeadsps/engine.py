"""The MOEA/D-(mu, lambda, sps) loop.

A run evaluates ``mu`` random genotypes, then repeats generations: the
selection strategy picks ``lam`` sub-problems, and for each of them one
offspring is bred from the neighborhood, evaluated, offered to the archive,
used to raise the reference point and finally offered to every neighbor for
replacement.  The budget may run out in the middle of a generation.

The per-offspring work happens in one compiled kernel (``_advance``) that can
stop after any number of evaluations and resume later, so checkpoints are
recorded at exact evaluation counts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numba
import numpy as np

from .landscape import NkInstance, _evaluate_into, random_genotype
from .metrics import hypervolume
from .scalarize import (
    WeightSet,
    _chebyshev,
    _update_reference,
    build_neighborhoods,
    generate_weights,
    init_reference,
    neighborhood_size,
)
from .sps import (
    STRATEGIES,
    TOURNAMENT_SIZE,
    SpsHistory,
    _select_dra,
    _select_rnd,
    _update_utilities,
)
from .variation import _crossover_into, _mutate_inplace, _pick_mate

__all__ = [
    "DEFAULT_CHECKPOINTS",
    "Archive",
    "RunConfig",
    "RunTrace",
    "SearchState",
    "TraceRecord",
    "archive_update",
    "initialize",
    "replace",
    "run",
    "step_evaluations",
    "step_generation",
]

DEFAULT_CHECKPOINTS = tuple(10**p for p in range(8))
_SPS_CODE = {"all": 0, "rnd": 1, "dra": 2}

# kernel status codes
_REACHED = 0
_ARCHIVE_FULL = 1
_GENERATION_DONE = 2

# layout of the integer counters shared with the kernel
_COUNTER, _GENERATION, _CURSOR, _SEL_LEN, _ARCH_N = range(5)


@dataclass(frozen=True)
class RunConfig:
    mu: int
    lam: int | None = None
    sps: str = "all"
    budget: int = 10_000
    checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS
    seed: int = 0
    t_fraction: float = 0.2
    mutation_rate: float | None = None
    weight_method: str | None = None

    def __post_init__(self) -> None:
        if self.sps not in STRATEGIES:
            raise ValueError(f"unknown sps {self.sps!r}; expected one of {STRATEGIES}")
        if self.mu < 1:
            raise ValueError(f"mu must be >= 1, got {self.mu}")
        if self.lam is None:
            default = {"all": self.mu, "dra": max(1, round(self.mu / 5)), "rnd": 1}[self.sps]
            object.__setattr__(self, "lam", default)
        if not 1 <= self.lam <= self.mu:
            raise ValueError(f"lambda must satisfy 1 <= lambda <= mu, got lambda={self.lam}, mu={self.mu}")
        if self.sps == "all" and self.lam != self.mu:
            raise ValueError(f"sps 'all' processes every sub-problem: lambda must equal mu={self.mu}")
        if self.budget < self.mu:
            raise ValueError(f"budget {self.budget} is smaller than the initial population mu={self.mu}")
        cps = tuple(int(c) for c in self.checkpoints)
        if any(b <= a for a, b in zip(cps, cps[1:])) or any(c < 1 for c in cps):
            raise ValueError(f"checkpoints must be positive and strictly ascending, got {cps}")
        object.__setattr__(self, "checkpoints", cps)
        if not 0 < self.t_fraction <= 1:
            raise ValueError(f"t_fraction must lie in (0, 1], got {self.t_fraction}")
        if self.mutation_rate is not None and not 0 <= self.mutation_rate <= 1:
            raise ValueError(f"mutation_rate must lie in [0, 1], got {self.mutation_rate}")

    @property
    def T(self) -> int:
        return neighborhood_size(self.mu, self.t_fraction)


class Archive:
    """Unbounded set of mutually non-dominated (genotype, objectives) pairs."""

    def __init__(self, N: int, M: int, capacity: int = 256):
        self._x = np.zeros((capacity, N), dtype=np.uint8)
        self._f = np.zeros((capacity, M), dtype=np.float64)
        self.size = 0

    def __len__(self) -> int:
        return self.size

    @property
    def points(self) -> np.ndarray:
        return self._f[: self.size]

    @property
    def genotypes(self) -> np.ndarray:
        return self._x[: self.size]

    def _grow(self) -> None:
        cap = self._x.shape[0]
        self._x = np.concatenate([self._x, np.zeros_like(self._x)])
        self._f = np.concatenate([self._f, np.zeros_like(self._f)])
        assert self._x.shape[0] == 2 * cap

    def add(self, x, f) -> bool:
        if self.size == self._x.shape[0]:
            self._grow()
        new_size = _archive_insert(self._x, self._f, self.size,
                                   np.asarray(x, dtype=np.uint8), np.asarray(f, dtype=np.float64))
        if new_size < 0:
            return False
        self.size = new_size
        return True

    def copy(self) -> "Archive":
        other = Archive.__new__(Archive)
        other._x = self._x.copy()
        other._f = self._f.copy()
        other.size = self.size
        return other


@numba.njit(cache=True)
def _archive_insert(ax, af, n, x, f):
    """Insert unless weakly dominated; drop members ``f`` dominates. -1 if rejected."""
    M = af.shape[1]
    for t in range(n):
        covered = True
        for m in range(M):
            if af[t, m] < f[m]:
                covered = False
                break
        if covered:
            return -1
    w = 0
    for t in range(n):
        dominated = True
        for m in range(M):
            if af[t, m] > f[m]:
                dominated = False
                break
        if not dominated:
            if w != t:
                ax[w] = ax[t]
                af[w] = af[t]
            w += 1
    ax[w] = x
    af[w] = f
    return w + 1


@numba.njit(cache=True)
def _replace(pop, popf, weights, neighbors, z, x, f):
    count = 0
    for k in neighbors:
        if _chebyshev(f, weights[k], z) < _chebyshev(popf[k], weights[k], z):
            pop[k] = x
            popf[k] = f
            count += 1
    return count


@numba.njit(cache=True)
def _all_g(popf, weights, z, out):
    for i in range(popf.shape[0]):
        out[i] = _chebyshev(popf[i], weights[i], z)


@numba.njit(cache=True)
def _advance(links, tables, pop, popf, weights, neighbors, z, ax, af, sel, ints,
             utilities, snapshot, boundary, sps_code, lam, rate,
             interval, threshold, decay, tournament, rng, stop_at, one_generation):
    mu = pop.shape[0]
    child = np.empty(pop.shape[1], dtype=np.uint8)
    fc = np.empty(popf.shape[1], dtype=np.float64)
    g_now = np.empty(mu, dtype=np.float64)
    while ints[_COUNTER] < stop_at:
        if ints[_CURSOR] >= ints[_SEL_LEN]:
            if sps_code == 0:
                for j in range(mu):
                    sel[j] = j
            elif sps_code == 1:
                _select_rnd(mu, lam, boundary, ints[_GENERATION], rng, sel)
            else:
                _select_dra(utilities, mu, lam, boundary, ints[_GENERATION], tournament, rng, sel)
            ints[_SEL_LEN] = lam
            ints[_CURSOR] = 0
        if ints[_ARCH_N] == ax.shape[0]:
            return _ARCHIVE_FULL
        i = sel[ints[_CURSOR]]
        k = _pick_mate(neighbors[i], rng)
        _crossover_into(pop[i], pop[k], rng, child)
        _mutate_inplace(child, rate, rng)
        _evaluate_into(links, tables, child, fc)
        ints[_COUNTER] += 1
        n = _archive_insert(ax, af, ints[_ARCH_N], child, fc)
        if n >= 0:
            ints[_ARCH_N] = n
        _update_reference(z, fc)
        _replace(pop, popf, weights, neighbors[i], z, child, fc)
        ints[_CURSOR] += 1
        if ints[_CURSOR] == ints[_SEL_LEN]:
            ints[_GENERATION] += 1
            if sps_code == 2:
                _all_g(popf, weights, z, g_now)
                _update_utilities(utilities, snapshot, g_now, ints[_GENERATION], interval, threshold, decay)
            if one_generation:
                return _GENERATION_DONE
    return _REACHED


@dataclass
class SearchState:
    instance: NkInstance
    config: RunConfig
    rng: np.random.Generator
    weights: WeightSet
    neighbors: np.ndarray
    population: np.ndarray
    objectives: np.ndarray
    z: np.ndarray
    archive: Archive
    history: SpsHistory
    selection: np.ndarray
    counters: np.ndarray = field(repr=False)

    @property
    def evaluations(self) -> int:
        return int(self.counters[_COUNTER])

    @property
    def generation(self) -> int:
        return int(self.counters[_GENERATION])

    @property
    def mid_generation(self) -> bool:
        return self.counters[_CURSOR] < self.counters[_SEL_LEN]

    @property
    def mutation_rate(self) -> float:
        rate = self.config.mutation_rate
        return 1.0 / self.instance.N if rate is None else float(rate)

    def scalarized(self, z: np.ndarray | None = None) -> np.ndarray:
        """Chebyshev value of every incumbent on its own weight vector."""
        out = np.empty(len(self.weights), dtype=np.float64)
        _all_g(self.objectives, self.weights.vectors, self.z if z is None else np.asarray(z, np.float64), out)
        return out


def initialize(instance: NkInstance, config: RunConfig) -> SearchState:
    """Evaluate ``mu`` random genotypes and build weights, neighborhoods, z and archive."""
    if config.budget < config.mu:
        raise ValueError(f"budget {config.budget} < mu {config.mu}")
    rng = np.random.default_rng(config.seed)
    N, M, mu = instance.N, instance.M, config.mu
    weights = generate_weights(mu, M, config.weight_method)
    neighbors = build_neighborhoods(weights, config.T)
    population = np.empty((mu, N), dtype=np.uint8)
    objectives = np.empty((mu, M), dtype=np.float64)
    archive = Archive(N, M)
    for j in range(mu):
        population[j] = random_genotype(N, rng)
        _evaluate_into(instance.links, instance.tables, population[j], objectives[j])
        archive.add(population[j], objectives[j])
    z = init_reference(objectives)
    g0 = np.empty(mu, dtype=np.float64)
    _all_g(objectives, weights.vectors, z, g0)
    counters = np.zeros(5, dtype=np.int64)
    counters[_COUNTER] = mu
    return SearchState(
        instance=instance,
        config=config,
        rng=rng,
        weights=weights,
        neighbors=neighbors,
        population=population,
        objectives=objectives,
        z=z,
        archive=archive,
        history=SpsHistory.start(g0),
        selection=np.zeros(config.lam, dtype=np.int64),
        counters=counters,
    )


def _drive(state: SearchState, stop_at: int, one_generation: bool) -> None:
    cfg = state.config
    hist = state.history
    stop_at = min(stop_at, cfg.budget)
    while True:
        state.counters[_ARCH_N] = state.archive.size
        status = _advance(
            state.instance.links, state.instance.tables, state.population, state.objectives,
            state.weights.vectors, state.neighbors, state.z,
            state.archive._x, state.archive._f, state.selection, state.counters,
            hist.utilities, hist.snapshot_g, state.weights.boundary_indices,
            _SPS_CODE[cfg.sps], cfg.lam, state.mutation_rate,
            hist.update_interval, hist.threshold, hist.decay, TOURNAMENT_SIZE,
            state.rng, stop_at, one_generation,
        )
        state.archive.size = int(state.counters[_ARCH_N])
        hist.generation = int(state.counters[_GENERATION])
        if status != _ARCHIVE_FULL:
            return
        state.archive._grow()


def step_evaluations(state: SearchState, count: int = 1) -> SearchState:
    """Advance by up to ``count`` evaluations, crossing generation borders freely."""
    _drive(state, state.evaluations + count, one_generation=False)
    return state


def step_generation(state: SearchState) -> SearchState:
    """Finish the current generation (or run a whole new one), stopping at the budget."""
    if state.evaluations >= state.config.budget:
        return state
    _drive(state, state.config.budget, one_generation=True)
    return state


def replace(state: SearchState, i: int, x, f) -> int:
    """Offer ``(x, f)`` to every neighbor of ``i``; returns the number of replacements."""
    return int(_replace(state.population, state.objectives, state.weights.vectors,
                        state.neighbors[i], state.z,
                        np.asarray(x, dtype=np.uint8), np.asarray(f, dtype=np.float64)))


def archive_update(archive: Archive, x, f) -> Archive:
    archive.add(x, f)
    return archive


@dataclass(frozen=True)
class TraceRecord:
    checkpoint: int
    evaluations: int
    hv: float
    archive_size: int
    g_min: float
    g_mean: float
    wall_seconds: float


@dataclass
class RunTrace:
    config: RunConfig
    records: list[TraceRecord]
    archive_points: np.ndarray
    archive_genotypes: np.ndarray
    evaluations: int


def _record(state: SearchState, checkpoint: int, t0: float) -> TraceRecord:
    g = state.scalarized()
    return TraceRecord(
        checkpoint=checkpoint,
        evaluations=state.evaluations,
        hv=hypervolume(state.archive.points, trusted=True),
        archive_size=len(state.archive),
        g_min=float(g.min()),
        g_mean=float(g.mean()),
        wall_seconds=time.perf_counter() - t0,
    )


def run(instance: NkInstance, config: RunConfig) -> RunTrace:
    """Run to the budget, recording one trace row per checkpoint it reaches."""
    t0 = time.perf_counter()
    state = initialize(instance, config)
    records = []
    for cp in config.checkpoints:
        if cp > config.budget:
            break
        if cp > state.evaluations:
            _drive(state, cp, one_generation=False)
        records.append(_record(state, cp, t0))
    _drive(state, config.budget, one_generation=False)
    return RunTrace(
        config=config,
        records=records,
        archive_points=state.archive.points.copy(),
        archive_genotypes=state.archive.genotypes.copy(),
        evaluations=state.evaluations,
    )
