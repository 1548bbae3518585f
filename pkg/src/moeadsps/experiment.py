"""Experiment matrices: configuration, seeded replications, traces and reports.

A run directory looks like::

    <output_dir>/
        config.json          copy of the experiment configuration
        trace.csv            one row per (cell, replication, checkpoint)
        timings.csv          wall-clock seconds for the same rows
        runs/<run_id>.archive.csv
        runs/<run_id>.trace.csv
        report_<mode>.csv    written by ``report``

``trace.csv`` is a pure function of the configuration; wall-clock times live
in ``timings.csv`` so that reruns stay byte-identical.  File layouts are
documented in docs/formats.md.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .engine import DEFAULT_CHECKPOINTS, RunConfig, run
from .landscape import NkInstance, NkSpec, generate_instance, load_instance
from .metrics import aggregate_reference, hypervolume, rank_table, read_front_csv, write_front_csv
from .sps import STRATEGIES

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TRACE_COLUMNS = (
    "N", "M", "K", "instance_seed", "algorithm", "mu", "lambda", "sps",
    "replication", "checkpoint", "archive_size", "hv",
)
TIMING_COLUMNS = ("run_id", "checkpoint", "wall_seconds")
ALGORITHM_LABELS = {"all": "MOEA/D", "dra": "MOEA/D-DRA", "rnd": "MOEA/D-RND"}
REPORT_MODES = ("convergence", "ranks", "lambda-sweep")

_TOP_KEYS = {
    "schema_version", "instances", "grid", "replications", "budget", "checkpoints",
    "master_seed", "output_dir", "workers", "t_fraction", "mutation_rate", "weight_method",
}
_GRID_KEYS = {"mu", "lambda", "sps"}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


def fmt(x: float) -> str:
    return f"{x:.9g}"


@dataclass(frozen=True)
class InstanceRef:
    spec: NkSpec
    path: str | None = None

    def load(self) -> NkInstance:
        if self.path is None:
            return generate_instance(self.spec)
        inst = load_instance(Path(self.path).read_bytes())
        if inst.spec != self.spec:
            raise ConfigError(f"instance file {self.path} holds {inst.spec}, expected {self.spec}")
        return inst


@dataclass(frozen=True)
class ExperimentConfig:
    instances: tuple[InstanceRef, ...]
    mu: tuple[int, ...]
    lam: tuple[int | str, ...]
    sps: tuple[str, ...]
    replications: int = 10
    budget: int = 10_000
    checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS
    master_seed: int = 0
    output_dir: str = "results"
    workers: int | None = None
    t_fraction: float = 0.2
    mutation_rate: float | None = None
    weight_method: str | None = None

    def to_json(self) -> dict[str, Any]:
        instances = []
        for ref in self.instances:
            entry: dict[str, Any] = {"N": ref.spec.N, "M": ref.spec.M, "K": ref.spec.K, "seed": ref.spec.seed}
            if ref.path is not None:
                entry = {"file": ref.path}
            instances.append(entry)
        return {
            "schema_version": SCHEMA_VERSION,
            "instances": instances,
            "grid": {"mu": list(self.mu), "lambda": list(self.lam), "sps": list(self.sps)},
            "replications": self.replications,
            "budget": self.budget,
            "checkpoints": list(self.checkpoints),
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "workers": self.workers,
            "t_fraction": self.t_fraction,
            "mutation_rate": self.mutation_rate,
            "weight_method": self.weight_method,
        }


def _int(value: Any, where: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{where}: expected an integer >= {minimum}, got {value!r}")
    return value


def _list(value: Any, where: str) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: expected a non-empty list, got {value!r}")
    return value


def _parse_instance(entry: Any, where: str, base: Path) -> InstanceRef:
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: expected an object, got {entry!r}")
    if "file" in entry:
        extra = set(entry) - {"file"}
        if extra:
            raise ConfigError(f"{where}: unknown keys {sorted(extra)} next to 'file'")
        path = Path(entry["file"])
        if not path.is_absolute():
            path = base / path
        try:
            inst = load_instance(path.read_bytes())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{where}.file: cannot load {path}: {exc}") from exc
        return InstanceRef(inst.spec, str(path))
    unknown = set(entry) - {"N", "M", "K", "seed"}
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = {"N", "M", "K", "seed"} - set(entry)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")
    try:
        spec = NkSpec(*(_int(entry[k], f"{where}.{k}") for k in ("N", "M", "K", "seed")))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return InstanceRef(spec)


def parse_config(data: Any, base_dir: str | os.PathLike = ".") -> ExperimentConfig:
    """Validate a decoded JSON document. Unknown keys are errors."""
    base = Path(base_dir)
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object at top level")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"config.schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    instances = tuple(
        _parse_instance(e, f"config.instances[{i}]", base)
        for i, e in enumerate(_list(data.get("instances"), "config.instances"))
    )
    grid = data.get("grid")
    if not isinstance(grid, dict):
        raise ConfigError("config.grid: expected an object with mu, lambda and sps lists")
    unknown = set(grid) - _GRID_KEYS
    if unknown:
        raise ConfigError(f"config.grid: unknown keys {sorted(unknown)}")
    mus = tuple(_int(v, f"config.grid.mu[{i}]", 1) for i, v in enumerate(_list(grid.get("mu"), "config.grid.mu")))
    lams: list[int | str] = []
    for i, v in enumerate(_list(grid.get("lambda"), "config.grid.lambda")):
        if v in ("mu", "mu/5"):
            lams.append(v)
        else:
            lams.append(_int(v, f"config.grid.lambda[{i}]", 1))
    spss = []
    for i, v in enumerate(_list(grid.get("sps"), "config.grid.sps")):
        if v not in STRATEGIES:
            raise ConfigError(f"config.grid.sps[{i}]: expected one of {STRATEGIES}, got {v!r}")
        spss.append(v)

    kwargs: dict[str, Any] = {}
    if "replications" in data:
        kwargs["replications"] = _int(data["replications"], "config.replications", 1)
    if "budget" in data:
        kwargs["budget"] = _int(data["budget"], "config.budget", 1)
    if "checkpoints" in data:
        cps = tuple(_int(v, f"config.checkpoints[{i}]", 1)
                    for i, v in enumerate(_list(data["checkpoints"], "config.checkpoints")))
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ConfigError(f"config.checkpoints: must be strictly ascending, got {list(cps)}")
        kwargs["checkpoints"] = cps
    if "master_seed" in data:
        kwargs["master_seed"] = _int(data["master_seed"], "config.master_seed")
    if "output_dir" in data:
        if not isinstance(data["output_dir"], str):
            raise ConfigError(f"config.output_dir: expected a string, got {data['output_dir']!r}")
        out = Path(data["output_dir"])
        kwargs["output_dir"] = str(out if out.is_absolute() else base / out)
    if data.get("workers") is not None:
        kwargs["workers"] = _int(data["workers"], "config.workers", 1)
    if "t_fraction" in data:
        t = data["t_fraction"]
        if not isinstance(t, (int, float)) or isinstance(t, bool) or not 0 < t <= 1:
            raise ConfigError(f"config.t_fraction: expected a number in (0, 1], got {t!r}")
        kwargs["t_fraction"] = float(t)
    if data.get("mutation_rate") is not None:
        r = data["mutation_rate"]
        if not isinstance(r, (int, float)) or isinstance(r, bool) or not 0 <= r <= 1:
            raise ConfigError(f"config.mutation_rate: expected a number in [0, 1], got {r!r}")
        kwargs["mutation_rate"] = float(r)
    if data.get("weight_method") is not None:
        if data["weight_method"] not in ("lattice", "lowdisc"):
            raise ConfigError(f"config.weight_method: expected 'lattice' or 'lowdisc', got {data['weight_method']!r}")
        kwargs["weight_method"] = data["weight_method"]
    return ExperimentConfig(instances=instances, mu=mus, lam=tuple(lams), sps=tuple(spss), **kwargs)


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(data, path.parent)


@dataclass(frozen=True)
class Cell:
    index: int
    instance: InstanceRef
    mu: int
    lam: int
    sps: str

    @property
    def algorithm(self) -> str:
        return ALGORITHM_LABELS[self.sps]

    def run_id(self, replication: int) -> str:
        return f"{self.instance.spec.label}__{self.sps}_mu{self.mu}_lam{self.lam}__r{replication:03d}"


def _resolve_lambda(token: int | str, mu: int) -> int:
    if token == "mu":
        return mu
    if token == "mu/5":
        return max(1, round(mu / 5))
    return int(token)


def expand_cells(config: ExperimentConfig) -> list[Cell]:
    """Legal grid cells in a fixed order; illegal or repeated cells are logged and skipped.

    ``index`` counts positions in the full product (legal or not), so adding
    values to the grid never changes the seeds of unrelated cells.
    """
    cells: list[Cell] = []
    seen = set()
    index = 0
    for ref in config.instances:
        for mu in config.mu:
            for token in config.lam:
                for sps in config.sps:
                    lam = _resolve_lambda(token, mu)
                    where = f"cell {index} ({ref.spec.label}, mu={mu}, lambda={token}, sps={sps})"
                    key = (ref.spec, mu, lam, sps)
                    if not 1 <= lam <= mu:
                        log.info("skipping %s: lambda=%d outside [1, mu]", where, lam)
                    elif sps == "all" and lam != mu:
                        log.info("skipping %s: sps 'all' requires lambda == mu", where)
                    elif config.budget < mu:
                        log.info("skipping %s: budget %d < mu", where, config.budget)
                    elif key in seen:
                        log.info("skipping %s: duplicate of an earlier cell", where)
                    else:
                        seen.add(key)
                        cells.append(Cell(index, ref, mu, lam, sps))
                    index += 1
    return cells


def run_seed(master_seed: int, cell_index: int, replication: int) -> int:
    state = np.random.SeedSequence([master_seed, cell_index, replication]).generate_state(1, np.uint64)
    return int(state[0])


@dataclass
class _Job:
    cell: Cell
    replication: int
    seed: int
    run_config: RunConfig
    runs_dir: Path
    instance: NkInstance | None = field(default=None, repr=False)


def _genotype_hex(bits: np.ndarray) -> str:
    return np.packbits(bits.astype(np.uint8)).tobytes().hex()


def _trace_rows(cell: Cell, replication: int, trace) -> list[list[str]]:
    s = cell.instance.spec
    return [
        [str(s.N), str(s.M), str(s.K), str(s.seed), cell.algorithm, str(cell.mu), str(cell.lam),
         cell.sps, str(replication), str(rec.checkpoint), str(rec.archive_size), fmt(rec.hv)]
        for rec in trace.records
    ]


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _execute(job: _Job) -> str:
    instance = job.instance if job.instance is not None else job.cell.instance.load()
    trace = run(instance, job.run_config)
    run_id = job.cell.run_id(job.replication)
    archive_path = job.runs_dir / f"{run_id}.archive.csv"
    tmp = archive_path.with_name(archive_path.name + ".tmp")
    write_front_csv(tmp, trace.archive_points, [_genotype_hex(g) for g in trace.archive_genotypes])
    os.replace(tmp, archive_path)
    timing = _csv_text(TIMING_COLUMNS, [[run_id, str(r.checkpoint), f"{r.wall_seconds:.3f}"] for r in trace.records])
    _write_atomic(job.runs_dir / f"{run_id}.timing.csv", timing)
    # the per-run trace is written last and marks the run as complete
    _write_atomic(job.runs_dir / f"{run_id}.trace.csv", _csv_text(TRACE_COLUMNS, _trace_rows(job.cell, job.replication, trace)))
    return run_id


def _read_rows(path: Path) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[1:]


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> Path:
    """Execute every legal cell and replication, then assemble ``trace.csv``.

    Runs whose per-run trace file already exists are not repeated.
    """
    out = Path(config.output_dir)
    runs_dir = out / "runs"
    try:
        runs_dir.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    (out / "config.json").write_text(json.dumps(config.to_json(), indent=2) + "\n")

    cells = expand_cells(config)
    jobs = []
    for cell in cells:
        for rep in range(config.replications):
            if (runs_dir / f"{cell.run_id(rep)}.trace.csv").exists():
                continue
            seed = run_seed(config.master_seed, cell.index, rep)
            rc = RunConfig(
                mu=cell.mu, lam=cell.lam, sps=cell.sps, budget=config.budget,
                checkpoints=config.checkpoints, seed=seed, t_fraction=config.t_fraction,
                mutation_rate=config.mutation_rate, weight_method=config.weight_method,
            )
            jobs.append(_Job(cell, rep, seed, rc, runs_dir))
    total = len(cells) * config.replications
    log.info("%d runs in %d cells, %d already complete", total, len(cells), total - len(jobs))

    workers = workers or config.workers or os.cpu_count() or 1
    if workers == 1 or len(jobs) <= 1:
        cache: dict[NkSpec, NkInstance] = {}
        for n, job in enumerate(jobs, 1):
            spec = job.cell.instance.spec
            if spec not in cache:
                cache[spec] = job.cell.instance.load()
            job.instance = cache[spec]
            log.info("[%d/%d] %s", n, len(jobs), _execute(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for n, run_id in enumerate(pool.map(_execute, jobs), 1):
                log.info("[%d/%d] %s", n, len(jobs), run_id)

    trace_rows, timing_rows = [], []
    for cell in cells:
        for rep in range(config.replications):
            run_id = cell.run_id(rep)
            trace_rows.extend(_read_rows(runs_dir / f"{run_id}.trace.csv"))
            timing_path = runs_dir / f"{run_id}.timing.csv"
            if timing_path.exists():
                timing_rows.extend(_read_rows(timing_path))
    _write_atomic(out / "trace.csv", _csv_text(TRACE_COLUMNS, trace_rows))
    _write_atomic(out / "timings.csv", _csv_text(TIMING_COLUMNS, timing_rows))
    return out / "trace.csv"


# ---------------------------------------------------------------- reporting


@dataclass(frozen=True)
class _Row:
    N: int
    M: int
    K: int
    instance_seed: int
    algorithm: str
    mu: int
    lam: int
    sps: str
    replication: int
    checkpoint: int
    archive_size: int
    hv: float

    @property
    def spec(self) -> NkSpec:
        return NkSpec(self.N, self.M, self.K, self.instance_seed)

    @property
    def run_id(self) -> str:
        return f"{self.spec.label}__{self.sps}_mu{self.mu}_lam{self.lam}__r{self.replication:03d}"


def read_trace(path: str | os.PathLike) -> list[_Row]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace header {header}")
        for r in reader:
            rows.append(_Row(int(r[0]), int(r[1]), int(r[2]), int(r[3]), r[4], int(r[5]), int(r[6]),
                             r[7], int(r[8]), int(r[9]), int(r[10]), float(r[11])))
    return rows


def reference_hypervolumes(rows: list[_Row], runs_dirs: list[Path]) -> dict[NkSpec, float]:
    """hv of the non-dominated union of all final archives, per instance."""
    archives: dict[NkSpec, dict[str, np.ndarray]] = {}
    for row in rows:
        bucket = archives.setdefault(row.spec, {})
        if row.run_id in bucket:
            continue
        for d in runs_dirs:
            path = d / f"{row.run_id}.archive.csv"
            if path.exists():
                bucket[row.run_id] = read_front_csv(path)[0]
                break
        else:
            raise FileNotFoundError(f"missing final archive for run {row.run_id}")
    # rounded like the trace values so that a run matching the reference scores exactly 0
    return {spec: float(fmt(hypervolume(aggregate_reference(fronts.values()), trusted=True)))
            for spec, fronts in archives.items()}


def _hvrd_samples(rows, ref_hv):
    for row in rows:
        hv_ref = ref_hv[row.spec]
        yield row, ((hv_ref - row.hv) / hv_ref if hv_ref > 0 else 0.0)


def report(trace_paths, mode: str, checkpoints=None, alpha: float = 0.05) -> tuple[list[str], list[list[str]]]:
    """Summaries of one or more trace files.

    ``convergence``: mean/median hvrd per (instance, algorithm, mu, lambda, checkpoint).
    ``ranks``: per instance and checkpoint, the rank of every configuration
    (number of configurations significantly better) plus its mean hvrd.
    ``lambda-sweep``: mean/median hvrd per (instance, sps, mu, checkpoint, lambda).
    The reference front of an instance aggregates every run on it.
    """
    if mode not in REPORT_MODES:
        raise ValueError(f"unknown report mode {mode!r}; expected one of {REPORT_MODES}")
    paths = [Path(p) for p in trace_paths]
    rows = [r for p in paths for r in read_trace(p)]
    if not rows:
        raise ValueError("no trace rows to report on")
    ref_hv = reference_hypervolumes(rows, [p.parent / "runs" for p in paths])
    wanted = set(checkpoints) if checkpoints else None
    samples: dict[tuple, list[float]] = {}
    for row, value in _hvrd_samples(rows, ref_hv):
        if wanted is not None and row.checkpoint not in wanted:
            continue
        inst = (row.N, row.M, row.K, row.instance_seed)
        if mode == "lambda-sweep":
            key = inst + (row.sps, row.mu, row.checkpoint, row.lam, row.algorithm)
        else:
            key = inst + (row.checkpoint, row.algorithm, row.mu, row.lam, row.sps)
        samples.setdefault(key, []).append(value)

    inst_cols = ["N", "M", "K", "instance_seed"]
    if mode == "convergence":
        header = inst_cols + ["algorithm", "mu", "lambda", "sps", "checkpoint", "runs", "mean_hvrd", "median_hvrd"]
        out = []
        for key in sorted(samples, key=lambda k: (k[:4], k[5], k[6], k[7], k[8], k[4])):
            v = samples[key]
            out.append([*map(str, key[:4]), key[5], str(key[6]), str(key[7]), key[8], str(key[4]),
                        str(len(v)), fmt(statistics.fmean(v)), fmt(statistics.median(v))])
        return header, out
    if mode == "lambda-sweep":
        header = inst_cols + ["sps", "mu", "checkpoint", "lambda", "algorithm", "runs", "mean_hvrd", "median_hvrd"]
        out = []
        for key in sorted(samples):
            v = samples[key]
            out.append([*map(str, key[:4]), key[4], str(key[5]), str(key[6]), str(key[7]), key[8],
                        str(len(v)), fmt(statistics.fmean(v)), fmt(statistics.median(v))])
        return header, out

    header = inst_cols + ["checkpoint", "algorithm", "mu", "lambda", "sps", "runs", "rank", "mean_hvrd"]
    groups: dict[tuple, dict[str, tuple[tuple, list[float]]]] = {}
    for key, v in samples.items():
        name = f"{key[5]}|{key[6]}|{key[7]}|{key[8]}"
        groups.setdefault(key[:5], {})[name] = (key, v)
    out = []
    for gkey in sorted(groups):
        members = groups[gkey]
        if len(members) > 1:
            ranks = rank_table({n: v for n, (_, v) in members.items()}, alpha)
        else:
            ranks = {n: 0 for n in members}
        for name in sorted(members, key=lambda n: (members[n][0][6], members[n][0][7], members[n][0][8])):
            key, v = members[name]
            out.append([*map(str, key[:4]), str(key[4]), key[5], str(key[6]), str(key[7]), key[8],
                        str(len(v)), str(ranks[name]), fmt(statistics.fmean(v))])
    return header, out


def write_report(trace_paths, mode: str, destination: str | os.PathLike, checkpoints=None,
                 alpha: float = 0.05) -> Path:
    header, rows = report(trace_paths, mode, checkpoints, alpha)
    destination = Path(destination)
    _write_atomic(destination, _csv_text(header, rows))
    return destination


__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "InstanceRef",
    "REPORT_MODES",
    "TRACE_COLUMNS",
    "expand_cells",
    "load_config",
    "parse_config",
    "read_trace",
    "report",
    "run_experiment",
    "run_seed",
    "write_report",
]
