"""Benchmark harness: configs, spatial-quantile targets, batch runs, CSVs.

A batch is described by a flat ``key = value`` text config (dotted keys,
``#`` comments).  Every (problem, algorithm, repetition) run gets its own
deterministic seed derived by hashing the master seed with the run
identity, so adding problems or algorithms never perturbs existing runs.
Each run writes one CSV of per-iteration rows; the batch writes a summary
CSV with the fraction of runs reaching each spatial-quantile target and
the mean number of evaluations to reach it (unsuccessful runs counted at
the full budget).
"""

from __future__ import annotations

import hashlib
import math
import os
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .benchmarks import get_problem
from .errors import InvalidInputError
from .kernels import Dataset, Smoothness
from .optimize import HeuristicConfig, run_ego, run_ego_r, run_random_search
from .relaxation import FitConfig

__all__ = [
    "ExperimentConfig",
    "TargetSet",
    "RunRecord",
    "SummaryRow",
    "parse_config_text",
    "spatial_quantile_targets",
    "run_single",
    "run_experiment",
    "summarize",
    "write_run_csv",
    "read_run_csv",
    "write_summary_csv",
    "read_summary_csv",
    "write_targets_csv",
    "read_targets_csv",
    "read_dataset_csv",
    "write_dataset_csv",
]

ALGORITHMS = ("ego", "ego-r-constant", "ego-r-concentration", "random")

DEFAULT_TARGET_LEVELS = (0.25, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002)


def parse_config_text(text):
    """Parse a flat ``key = value`` config with dotted keys."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"config line {lineno} is not 'key = value': {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _split_list(value):
    return tuple(item.strip() for item in value.split(",") if item.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one benchmark batch (desk-scale defaults)."""

    problems: tuple = ("goldstein-price",)
    dimension: int | None = None
    algorithms: tuple = ("ego", "ego-r-constant")
    smoothness: Smoothness = Smoothness.FIVE_HALVES
    alpha: float = 0.25
    grid_size: int = 10
    n0_multiplier: int = 3
    budget: int = 100
    n_rep: int = 10
    seed: int = 0
    target_levels: tuple = DEFAULT_TARGET_LEVELS
    n_mc: int = 100_000

    def __post_init__(self):
        for algorithm in self.algorithms:
            if algorithm not in ALGORITHMS:
                raise InvalidInputError(
                    f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}"
                )

    @classmethod
    def from_mapping(cls, mapping):
        kw = {}
        if "problem.name" in mapping:
            kw["problems"] = _split_list(mapping["problem.name"])
        if "problem.dimension" in mapping:
            kw["dimension"] = int(mapping["problem.dimension"])
        if "algorithm" in mapping:
            kw["algorithms"] = _split_list(mapping["algorithm"])
        if "kernel.smoothness" in mapping:
            kw["smoothness"] = Smoothness.from_string(mapping["kernel.smoothness"])
        if "regp.alpha" in mapping:
            kw["alpha"] = float(mapping["regp.alpha"])
        if "regp.grid_size" in mapping:
            kw["grid_size"] = int(mapping["regp.grid_size"])
        if "bo.n0_multiplier" in mapping:
            kw["n0_multiplier"] = int(mapping["bo.n0_multiplier"])
        if "bo.budget" in mapping:
            kw["budget"] = int(mapping["bo.budget"])
        if "bench.n_rep" in mapping:
            kw["n_rep"] = int(mapping["bench.n_rep"])
        if "bench.target_levels" in mapping:
            kw["target_levels"] = tuple(
                float(v) for v in _split_list(mapping["bench.target_levels"])
            )
        if "bench.n_mc" in mapping:
            kw["n_mc"] = int(mapping["bench.n_mc"])
        if "seed" in mapping:
            kw["seed"] = int(mapping["seed"])
        return cls(**kw)

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(parse_config_text(fh.read()))

    def fit_config(self):
        return FitConfig(smoothness=self.smoothness)

    def heuristic(self, algorithm):
        kind = {"ego": "none", "ego-r-constant": "constant",
                "ego-r-concentration": "concentration"}.get(algorithm)
        if kind is None:
            return None
        return HeuristicConfig(kind=kind, alpha=self.alpha, grid_size=self.grid_size)


@dataclass(frozen=True, eq=False)
class TargetSet:
    """Spatial-quantile targets of one problem.

    Levels are stored in decreasing order, so target values are
    non-increasing toward the minimum.  ``standard_errors`` are
    order-statistic interval estimates of the Monte Carlo error.
    """

    levels: np.ndarray
    values: np.ndarray
    standard_errors: np.ndarray

    def __post_init__(self):
        order = np.argsort(np.asarray(self.levels, dtype=float))[::-1]
        for name in ("levels", "values", "standard_errors"):
            arr = np.asarray(getattr(self, name), dtype=float)[order]
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.levels.size


def spatial_quantile_targets(problem, levels, n_mc, rng):
    """Monte Carlo estimates of the level-quantiles of f under the uniform
    distribution on the domain.

    Requires at least 1e5 samples so the smallest default level is still
    resolved; standard errors come from the order-statistic confidence
    interval mapped through the empirical CDF.
    """
    if n_mc < 100_000:
        raise InvalidInputError("quantile targets need n_mc >= 100000")
    rng = np.random.default_rng(rng)
    points = problem.domain.uniform(n_mc, rng)
    samples = np.fromiter((problem(x) for x in points), dtype=float, count=n_mc)
    samples.sort()
    levels = np.asarray(levels, dtype=float)
    values = np.quantile(samples, levels)
    ses = np.empty_like(values)
    for i, p in enumerate(levels):
        half = 3.0 * math.sqrt(p * (1.0 - p) / n_mc)
        lo = np.quantile(samples, max(p - half, 0.0))
        hi = np.quantile(samples, min(p + half, 1.0))
        ses[i] = (hi - lo) / 6.0
    return TargetSet(levels=levels, values=values, standard_errors=ses)


def run_seed(master_seed, problem_name, algorithm, rep):
    """Stable per-run seed: runs never move when the batch grows."""
    digest = hashlib.sha256(
        f"{master_seed}|{problem_name}|{algorithm}|{rep}".encode()
    ).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True, eq=False)
class RunRecord:
    """One optimization run and its per-target outcome."""

    run_id: str
    problem: str
    dimension: int
    algorithm: str
    rep: int
    seed: int
    trace: object

    def best_values(self):
        return self.trace.best_values()

    def evaluations_to(self, target_value):
        """1-based first iteration reaching the target, or None."""
        best = self.best_values()
        hits = np.nonzero(best <= target_value)[0]
        return int(hits[0]) + 1 if hits.size else None


def run_single(problem, algorithm, seed, config):
    """Execute one run of ``algorithm`` on ``problem``."""
    n0 = config.n0_multiplier * problem.dimension
    fit_config = config.fit_config()
    if algorithm == "random":
        return run_random_search(problem, problem.domain, config.budget, seed)
    if algorithm == "ego":
        return run_ego(problem, problem.domain, config.budget, n0, seed, fit_config)
    heuristic = config.heuristic(algorithm)
    if heuristic is None:
        raise InvalidInputError(f"unknown algorithm {algorithm!r}")
    return run_ego_r(problem, problem.domain, config.budget, n0, seed,
                     heuristic, fit_config)


def _execute_task(args):
    problem_name, dimension, algorithm, rep, config = args
    problem = get_problem(problem_name, dimension)
    seed = run_seed(config.seed, problem.name, algorithm, rep)
    trace = run_single(problem, algorithm, seed, config)
    run_id = f"{problem.name}-{problem.dimension}_{algorithm}_r{rep:03d}"
    return RunRecord(
        run_id=run_id,
        problem=problem.name,
        dimension=problem.dimension,
        algorithm=algorithm,
        rep=rep,
        seed=seed,
        trace=trace,
    )


@dataclass(frozen=True)
class SummaryRow:
    problem: str
    algorithm: str
    target_level: float
    target_value: float
    success_fraction: float
    mean_evaluations: float


def summarize(records, targets_by_problem, budget):
    """Per (problem, algorithm, target): success fraction and mean
    evaluations, unsuccessful runs counted at the full budget."""
    if not records:
        raise InvalidInputError("no run records to summarize")
    rows = []
    keys = sorted({(r.problem, r.algorithm) for r in records})
    for problem, algorithm in keys:
        group = [r for r in records if r.problem == problem and r.algorithm == algorithm]
        targets = targets_by_problem[problem]
        for level, value in zip(targets.levels, targets.values):
            evals = [r.evaluations_to(value) for r in group]
            successes = [e for e in evals if e is not None]
            fraction = len(successes) / len(group)
            mean_evals = float(
                np.mean([e if e is not None else budget for e in evals])
            )
            rows.append(
                SummaryRow(
                    problem=problem,
                    algorithm=algorithm,
                    target_level=float(level),
                    target_value=float(value),
                    success_fraction=fraction,
                    mean_evaluations=mean_evals,
                )
            )
    return rows


def run_experiment(config, out_dir, jobs=1, make_figures=True, progress=None):
    """Run the whole batch and write run CSVs, targets, and the summary.

    Individual run failures are recorded (and skipped in the summary), they
    never abort the batch.  Returns ``(records, summary_rows, targets)``.
    """
    os.makedirs(out_dir, exist_ok=True)
    targets_by_problem = {}
    problems = {}
    for name in config.problems:
        problem = get_problem(name, config.dimension)
        problems[problem.name] = problem
        targets_by_problem[problem.name] = spatial_quantile_targets(
            problem,
            config.target_levels,
            config.n_mc,
            np.random.default_rng(run_seed(config.seed, problem.name, "targets", 0)),
        )
        write_targets_csv(
            os.path.join(out_dir, f"targets_{problem.name}-{problem.dimension}.csv"),
            problem.name,
            targets_by_problem[problem.name],
        )

    tasks = [
        (problem.name, problem.dimension, algorithm, rep, config)
        for problem in problems.values()
        for algorithm in config.algorithms
        for rep in range(config.n_rep)
    ]
    records = []
    failures = []

    def handle(record):
        records.append(record)
        write_run_csv(os.path.join(out_dir, f"{record.run_id}.csv"), record)
        if progress is not None:
            progress(record)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for task, outcome in zip(tasks, pool.map(_try_execute, tasks)):
                if isinstance(outcome, RunRecord):
                    handle(outcome)
                else:
                    failures.append((task[:4], outcome))
    else:
        for task in tasks:
            outcome = _try_execute(task)
            if isinstance(outcome, RunRecord):
                handle(outcome)
            else:
                failures.append((task[:4], outcome))
    for identity, message in failures:
        warnings.warn(f"run {identity} failed: {message}", stacklevel=2)
    summary = summarize(records, targets_by_problem, config.budget)
    write_summary_csv(os.path.join(out_dir, "summary.csv"), summary)
    if make_figures:
        from . import figures

        for problem in problems.values():
            figures.save_benchmark_figure(
                [row for row in summary if row.problem == problem.name],
                os.path.join(out_dir, f"benchmark_{problem.name}-{problem.dimension}.png"),
                title=f"{problem.name} ({problem.dimension}d)",
            )
    return records, summary, targets_by_problem


def _try_execute(task):
    try:
        return _execute_task(task)
    except Exception as exc:  # noqa: BLE001 - batch must survive run failures
        return f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# delimited output
#
# Floats are written with repr (shortest round-trip); empty fields decode to
# None, so parse(write(x)) == x for every record type.


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # builtin-float repr round-trips exactly
    return str(value)


def _parse_optional_float(text):
    return None if text == "" else float(text)


def run_csv_header(dimension):
    return (
        ["run_id", "iteration"]
        + [f"x_{j + 1}" for j in range(dimension)]
        + ["f", "best_so_far", "t0", "t_selected", "log_sigma2"]
        + [f"log_rho_{j + 1}" for j in range(dimension)]
        + ["mean_const"]
    )


def trace_csv_rows(run_id, trace, dimension):
    rows = []
    for row in trace.rows:
        params = row.params
        log_sigma2 = math.log10(params.variance) if params is not None else None
        log_rho = (
            [math.log10(v) for v in params.lengthscales]
            if params is not None
            else [None] * dimension
        )
        mean_const = params.mean_const if params is not None else None
        rows.append(
            [run_id, row.iteration]
            + [float(v) for v in row.x]
            + [row.value, row.best_so_far, row.t0, row.t_selected, log_sigma2]
            + log_rho
            + [mean_const]
        )
    return rows


def write_run_csv(path, record):
    header = run_csv_header(record.dimension)
    lines = [",".join(header)]
    for row in trace_csv_rows(record.run_id, record.trace, record.dimension):
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_run_csv(path):
    """Rows of a run CSV as dicts with floats (None for empty fields)."""
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        row = {}
        for key, cell in zip(header, cells):
            if key == "run_id":
                row[key] = cell
            elif key == "iteration":
                row[key] = int(cell)
            else:
                row[key] = _parse_optional_float(cell)
        rows.append(row)
    return rows


def write_summary_csv(path, rows):
    header = ["problem", "algorithm", "target_level", "target_value",
              "success_fraction", "mean_evaluations"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    row.problem,
                    row.algorithm,
                    row.target_level,
                    row.target_value,
                    row.success_fraction,
                    row.mean_evaluations,
                )
            )
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def read_summary_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    rows = []
    for line in lines[1:]:
        problem, algorithm, level, value, fraction, mean_evals = line.split(",")
        rows.append(
            SummaryRow(
                problem=problem,
                algorithm=algorithm,
                target_level=float(level),
                target_value=float(value),
                success_fraction=float(fraction),
                mean_evaluations=float(mean_evals),
            )
        )
    return rows


def write_targets_csv(path, problem_name, targets):
    lines = ["problem,level,target_value,standard_error"]
    for level, value, se in zip(targets.levels, targets.values, targets.standard_errors):
        lines.append(",".join([problem_name, _fmt(float(level)), _fmt(float(value)), _fmt(float(se))]))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_targets_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    levels, values, ses = [], [], []
    name = None
    for line in lines[1:]:
        name, level, value, se = line.split(",")
        levels.append(float(level))
        values.append(float(value))
        ses.append(float(se))
    return name, TargetSet(levels=np.array(levels), values=np.array(values),
                           standard_errors=np.array(ses))


def read_dataset_csv(path):
    """Input data: header row, d coordinate columns, one value column.

    Malformed rows raise with their line number.
    """
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    lines = [line for line in lines if line.strip()]
    if len(lines) < 2:
        raise InvalidInputError(f"{path}: need a header row and at least one data row")
    header = [cell.strip() for cell in lines[0].split(",")]
    if len(header) < 2:
        raise InvalidInputError(f"{path}: need at least one coordinate column and a value column")
    points, values = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise InvalidInputError(
                f"{path}: row {lineno} has {len(cells)} cells, expected {len(header)}"
            )
        try:
            numbers = [float(cell) for cell in cells]
        except ValueError as exc:
            raise InvalidInputError(f"{path}: row {lineno}: {exc}") from None
        points.append(numbers[:-1])
        values.append(numbers[-1])
    return Dataset(np.array(points), np.array(values)), header


def write_dataset_csv(path, dataset, header=None):
    d = dataset.dimension
    header = header or [f"x_{j + 1}" for j in range(d)] + ["z"]
    lines = [",".join(header)]
    for x, z in zip(dataset.points, dataset.values):
        lines.append(",".join(_fmt(float(v)) for v in (*x, z)))
    _atomic_write(path, "\n".join(lines) + "\n")
