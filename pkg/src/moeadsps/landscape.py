"""Multi-objective NK landscapes.

An instance holds, for every objective ``m`` and bit position ``i``, a sorted
set of ``K`` epistatic link positions (never ``i`` itself) and a contribution
table with ``2**(K+1)`` entries drawn uniformly from ``[0, 1)``.  The value of
objective ``m`` is the mean contribution over all positions::

    f_m(x) = (1/N) * sum_i tables[m, i, index(x_i, x[links[m, i]])]

``index`` packs the own bit as the most significant bit, followed by the link
bits in stored (ascending) order.  Summation runs left to right over ``i`` and
the sum is divided by ``N`` once at the end.

Randomness: a :class:`numpy.random.SeedSequence` built from the instance seed
spawns one child stream per ``(m, i)`` pair, child number ``m * N + i``.  Each
child drives a PCG64 generator which draws the links first and the table
second.  Positions are 0-based throughout.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "FORMAT_VERSION",
    "InstanceFormatError",
    "NkInstance",
    "NkSpec",
    "evaluate",
    "generate_instance",
    "load_instance",
    "random_genotype",
    "save_instance",
]

MAGIC = b"NKLS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIIIQ")


class InstanceFormatError(ValueError):
    """Raised when an instance byte stream is corrupt or has the wrong version."""


@dataclass(frozen=True)
class NkSpec:
    N: int
    M: int
    K: int
    seed: int

    def __post_init__(self) -> None:
        for name in ("N", "M", "K", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if not 0 <= self.K <= self.N - 1:
            raise ValueError(f"K must satisfy 0 <= K <= N-1, got K={self.K}, N={self.N}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def label(self) -> str:
        return f"N{self.N}_M{self.M}_K{self.K}_s{self.seed}"


@dataclass(frozen=True, eq=False)
class NkInstance:
    """A generated landscape. Arrays are read-only.

    ``links`` has shape ``(M, N, K)`` and ``tables`` shape ``(M, N, 2**(K+1))``.
    """

    spec: NkSpec
    links: np.ndarray
    tables: np.ndarray

    def __post_init__(self) -> None:
        s = self.spec
        links = np.ascontiguousarray(self.links, dtype=np.int64)
        tables = np.ascontiguousarray(self.tables, dtype=np.float64)
        if links.shape != (s.M, s.N, s.K):
            raise ValueError(f"links shape {links.shape} != {(s.M, s.N, s.K)}")
        if tables.shape != (s.M, s.N, 2 ** (s.K + 1)):
            raise ValueError(f"tables shape {tables.shape} != {(s.M, s.N, 2 ** (s.K + 1))}")
        links.setflags(write=False)
        tables.setflags(write=False)
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "tables", tables)

    @property
    def N(self) -> int:
        return self.spec.N

    @property
    def M(self) -> int:
        return self.spec.M

    @property
    def K(self) -> int:
        return self.spec.K

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NkInstance):
            return NotImplemented
        return (
            self.spec == other.spec
            and np.array_equal(self.links, other.links)
            and np.array_equal(self.tables, other.tables)
        )

    __hash__ = None  # type: ignore[assignment]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return evaluate(self, x)


def generate_instance(spec: NkSpec) -> NkInstance:
    """Draw links and contribution tables for ``spec``; fully determined by its seed."""
    N, M, K = spec.N, spec.M, spec.K
    links = np.empty((M, N, K), dtype=np.int64)
    tables = np.empty((M, N, 2 ** (K + 1)), dtype=np.float64)
    children = np.random.SeedSequence(spec.seed).spawn(M * N)
    for m in range(M):
        for i in range(N):
            rng = np.random.Generator(np.random.PCG64(children[m * N + i]))
            if K:
                others = np.delete(np.arange(N), i)
                links[m, i] = np.sort(rng.choice(others, size=K, replace=False))
            tables[m, i] = rng.random(2 ** (K + 1))
    return NkInstance(spec, links, tables)


@numba.njit(cache=True)
def _evaluate_into(links, tables, x, out):
    M, N, K = links.shape
    for m in range(M):
        total = 0.0
        for i in range(N):
            idx = np.int64(x[i])
            for j in range(K):
                idx = (idx << 1) | np.int64(x[links[m, i, j]])
            total += tables[m, i, idx]
        out[m] = total / N


def evaluate(instance: NkInstance, x: np.ndarray) -> np.ndarray:
    """Objective vector of genotype ``x`` (length ``N``, values 0/1)."""
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != instance.N:
        raise ValueError(f"genotype length {x.shape} does not match N={instance.N}")
    bits = x.astype(np.uint8)
    if np.any(bits != x) or np.any(bits > 1):
        raise ValueError("genotype must contain only 0/1 values")
    out = np.empty(instance.M, dtype=np.float64)
    _evaluate_into(instance.links, instance.tables, bits, out)
    return out


def random_genotype(N: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random bit string as a ``uint8`` array."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return rng.integers(0, 2, size=N, dtype=np.uint8)


def save_instance(instance: NkInstance) -> bytes:
    """Serialize to the versioned ``NKLS`` container (see docs/formats.md)."""
    s = instance.spec
    body = (
        _HEADER.pack(MAGIC, FORMAT_VERSION, s.N, s.M, s.K, s.seed)
        + instance.links.astype("<u4").tobytes()
        + instance.tables.astype("<f8").tobytes()
    )
    return body + struct.pack("<I", zlib.crc32(body))


def load_instance(data: bytes) -> NkInstance:
    data = bytes(data)
    if len(data) < _HEADER.size + 4:
        raise InstanceFormatError("stream too short for an instance header")
    magic, version, N, M, K, seed = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise InstanceFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise InstanceFormatError(f"unsupported format version {version} (expected {FORMAT_VERSION})")
    n_links = M * N * K
    n_tables = M * N * 2 ** (K + 1)
    expected = _HEADER.size + 4 * n_links + 8 * n_tables + 4
    if len(data) != expected:
        raise InstanceFormatError(f"stream length {len(data)} != expected {expected}")
    (crc,) = struct.unpack_from("<I", data, expected - 4)
    if zlib.crc32(data[: expected - 4]) != crc:
        raise InstanceFormatError("checksum mismatch")
    try:
        spec = NkSpec(N, M, K, seed)
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from exc
    offset = _HEADER.size
    links = np.frombuffer(data, dtype="<u4", count=n_links, offset=offset).astype(np.int64)
    offset += 4 * n_links
    tables = np.frombuffer(data, dtype="<f8", count=n_tables, offset=offset).astype(np.float64)
    links = links.reshape(M, N, K)
    tables = tables.reshape(M, N, 2 ** (K + 1))
    for i in range(N):
        row = links[:, i, :]
        if np.any(row == i) or np.any(row < 0) or np.any(row >= N):
            raise InstanceFormatError(f"invalid link indices at position {i}")
    if np.any(tables < 0.0) or np.any(tables >= 1.0):
        raise InstanceFormatError("contribution values outside [0, 1)")
    return NkInstance(spec, links, tables)
