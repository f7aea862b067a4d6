"""Command-line front end.

Subcommands
-----------
fit        fit a relaxed-GP model to a data CSV and report the value
           transform (original vs relaxed observations)
score      leave-one-out truncated-CRPS report of a fit
optimize   run one optimization, streaming the trace to stdout as CSV
benchmark  run a batch described by a config file
targets    Monte Carlo spatial-quantile targets of a benchmark problem

Report paths write delimited output and render matching PNG figures unless
``--no-figures`` is given.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .benchmarks import get_problem, problem_names
from .errors import RegpError
from .experiment import (
    ALGORITHMS,
    ExperimentConfig,
    RunRecord,
    read_dataset_csv,
    run_csv_header,
    run_seed,
    run_single,
    spatial_quantile_targets,
    trace_csv_rows,
    write_run_csv,
    write_targets_csv,
    _atomic_write,
    _fmt,
)
from .kernels import Smoothness
from .optimize import Domain
from .relaxation import FitConfig, RelaxationSet, fit_gp, fit_regp
from .scoring import ScoreRange
from .selection import build_candidate_grid, fast_loo, loo_tcrps, select_relaxation


def _add_smoothness(parser):
    parser.add_argument(
        "--smoothness", default="2.5", choices=["0.5", "1.5", "2.5", "inf"],
        help="Matérn smoothness of the kernel (default 2.5)",
    )


def _add_relaxation_options(parser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--relax-above", type=float, metavar="T",
                       help="force the relaxation set [T, +inf)")
    group.add_argument("--relax-outside", type=float, nargs=2, metavar=("A", "B"),
                       help="force the relaxation set (-inf, A] U [B, +inf)")
    group.add_argument("--relax-none", action="store_true",
                       help="force plain interpolation (empty relaxation set)")
    group.add_argument("--select-below", type=float, metavar="T0",
                       help="select the relaxation automatically for the "
                            "range of interest (-inf, T0)")
    group.add_argument("--select-between", type=float, nargs=2, metavar=("A", "B"),
                       help="select a two-sided relaxation automatically for "
                            "the range of interest (A, B)")
    parser.add_argument("--grid-size", type=int, default=10,
                        help="number of candidate thresholds (default 10)")


def _fit_from_options(data, args, config):
    """Fit per the relaxation options; returns (model, selection or None, q_range)."""
    if args.relax_above is not None:
        return fit_regp(data, RelaxationSet.above(args.relax_above), config), None, None
    if args.relax_outside is not None:
        a, b = args.relax_outside
        return fit_regp(data, RelaxationSet.outside(a, b), config), None, None
    if args.relax_none:
        return fit_regp(data, RelaxationSet.empty(), config), None, None
    if args.select_below is not None:
        q_range = ScoreRange.below(args.select_below)
        grid = build_candidate_grid(data.values, q_range, "one_sided_min", args.grid_size)
    else:
        a, b = args.select_between
        q_range = ScoreRange.between(a, b)
        grid = build_candidate_grid(data.values, q_range, "two_sided_excursion",
                                    args.grid_size)
    result = select_relaxation(data, grid, q_range, config)
    return result.fitted, result, q_range


def _cmd_fit(args):
    data, header = read_dataset_csv(args.data)
    config = FitConfig(smoothness=Smoothness.from_string(args.smoothness))
    model, selection, _ = _fit_from_options(data, args, config)
    os.makedirs(args.out_dir, exist_ok=True)

    values_path = os.path.join(args.out_dir, "fit_values.csv")
    lines = [",".join(header[:-1] + ["z", "z_star"])]
    for x, z, zs in zip(data.points, data.values, model.relaxed_values):
        lines.append(",".join(_fmt(float(v)) for v in (*x, z, zs)))
    _atomic_write(values_path, "\n".join(lines) + "\n")
    print(f"wrote {values_path}")

    thresholds = []
    if selection is not None:
        cand_path = os.path.join(args.out_dir, "fit_candidates.csv")
        lines = ["candidate,threshold,loo_tcrps,chosen"]
        for g, (t, s) in enumerate(zip(selection.grid.thresholds, selection.scores)):
            lines.append(
                ",".join(
                    [str(g), _fmt(float(t)), _fmt(None if math.isnan(s) else float(s)),
                     str(int(g == selection.chosen_index))]
                )
            )
        _atomic_write(cand_path, "\n".join(lines) + "\n")
        print(f"wrote {cand_path}")
        print(f"selected candidate {selection.chosen_index} "
              f"(threshold {selection.chosen_threshold:g}, "
              f"loo_tcrps {selection.scores[selection.chosen_index]:.6g})")
        thresholds = [t for t in (selection.chosen_threshold,) if math.isfinite(t)]
    else:
        for lo, hi in model.relaxation.intervals:
            thresholds.extend(t for t in (lo, hi) if math.isfinite(t))

    params = model.params
    print(f"mean_const {params.mean_const:.6g}  variance {params.variance:.6g}  "
          f"lengthscales {np.array2string(params.lengthscales, precision=4)}")
    print(f"negative log-likelihood {model.nll():.6g}")

    if not args.no_figures:
        from . import figures

        transform_path = os.path.join(args.out_dir, "fit_transform.png")
        figures.save_transform_figure(
            data.values, model.relaxed_values, transform_path, thresholds=thresholds
        )
        print(f"wrote {transform_path}")
        if data.dimension == 1:
            lo = float(np.min(data.points))
            hi = float(np.max(data.points))
            pad = 0.05 * (hi - lo if hi > lo else 1.0)
            model_path = os.path.join(args.out_dir, "fit_model.png")
            figures.save_fit_figure_1d(
                model, Domain([lo - pad], [hi + pad]), model_path,
                threshold=thresholds[0] if thresholds else None,
            )
            print(f"wrote {model_path}")
    return 0


def _cmd_score(args):
    data, _ = read_dataset_csv(args.data)
    config = FitConfig(smoothness=Smoothness.from_string(args.smoothness))
    if args.q_below is not None:
        q_range = ScoreRange.below(args.q_below)
    elif args.q_between is not None:
        q_range = ScoreRange.between(*args.q_between)
    else:
        q_range = ScoreRange.all()
    model, selection, _ = _fit_from_options(data, args, config)
    loo = fast_loo(model)
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "loo_scores.csv")
    from .scoring import tcrps

    lines = ["index,loo_mean,loo_sd,observed,tcrps"]
    for i, (m, v, z) in enumerate(zip(loo.means, loo.variances, data.values)):
        sd = math.sqrt(max(v, 0.0))
        lines.append(",".join(
            [str(i), _fmt(float(m)), _fmt(sd), _fmt(float(z)),
             _fmt(tcrps(m, sd, q_range, z))]
        ))
    _atomic_write(path, "\n".join(lines) + "\n")
    print(f"wrote {path}")
    if selection is not None:
        print(f"selected threshold {selection.chosen_threshold:g}")
    print(f"loo_tcrps {loo_tcrps(model, q_range, data.values):.8g}")
    return 0


def _cmd_optimize(args):
    problem = get_problem(args.problem, args.dimension)
    config = ExperimentConfig(
        problems=(problem.name,),
        dimension=problem.dimension,
        algorithms=(args.algorithm,),
        smoothness=Smoothness.from_string(args.smoothness),
        alpha=args.alpha,
        grid_size=args.grid_size,
        n0_multiplier=args.n0_multiplier,
        budget=args.budget,
        seed=args.seed,
    )
    header = run_csv_header(problem.dimension)
    print(",".join(header))
    run_id = f"{problem.name}-{problem.dimension}_{args.algorithm}_single"

    def live(row):
        line = trace_csv_rows(run_id, _OneRow(row), problem.dimension)[0]
        print(",".join(_fmt(v) for v in line), flush=True)

    seed = run_seed(config.seed, problem.name, args.algorithm, 0)
    trace = _run_with_callback(problem, args.algorithm, seed, config, live)
    print(f"# best {trace.best!r}", file=sys.stderr)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        record = RunRecord(
            run_id=run_id, problem=problem.name, dimension=problem.dimension,
            algorithm=args.algorithm, rep=0, seed=seed, trace=trace,
        )
        path = os.path.join(args.out_dir, f"{run_id}.csv")
        write_run_csv(path, record)
        print(f"# wrote {path}", file=sys.stderr)
        if not args.no_figures:
            from . import figures

            fig_path = os.path.join(args.out_dir, f"{run_id}.png")
            figures.save_progress_figure({args.algorithm: trace}, fig_path,
                                         title=run_id)
            print(f"# wrote {fig_path}", file=sys.stderr)
    return 0


class _OneRow:
    """Minimal trace wrapper so a single row reuses the CSV formatting."""

    def __init__(self, row):
        self.rows = (row,)


def _run_with_callback(problem, algorithm, seed, config, callback):
    from .optimize import run_ego, run_ego_r, run_random_search

    n0 = config.n0_multiplier * problem.dimension
    fit_config = config.fit_config()
    if algorithm == "random":
        return run_random_search(problem, problem.domain, config.budget, seed,
                                 callback=callback)
    if algorithm == "ego":
        return run_ego(problem, problem.domain, config.budget, n0, seed,
                       fit_config, callback=callback)
    return run_ego_r(problem, problem.domain, config.budget, n0, seed,
                     config.heuristic(algorithm), fit_config, callback=callback)


def _cmd_benchmark(args):
    from .experiment import run_experiment

    config = ExperimentConfig.from_file(args.config)
    done = []

    def progress(record):
        done.append(record)
        print(f"[{len(done)}] {record.run_id} best {record.trace.best:.6g}", flush=True)

    records, summary, _ = run_experiment(
        config, args.out_dir, jobs=args.jobs,
        make_figures=not args.no_figures, progress=progress,
    )
    print(f"{len(records)} runs -> {os.path.join(args.out_dir, 'summary.csv')}")
    return 0


def _cmd_targets(args):
    problem = get_problem(args.problem, args.dimension)
    levels = tuple(float(v) for v in args.levels.split(","))
    targets = spatial_quantile_targets(
        problem, levels, args.n_mc, np.random.default_rng(args.seed)
    )
    print("problem,level,target_value,standard_error")
    for level, value, se in zip(targets.levels, targets.values,
                                targets.standard_errors):
        print(",".join([problem.name, _fmt(float(level)), _fmt(float(value)),
                        _fmt(float(se))]))
    if args.out:
        write_targets_csv(args.out, problem.name, targets)
        print(f"# wrote {args.out}", file=sys.stderr)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="regp",
        description="Relaxed Gaussian-process modeling and EGO-R optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a relaxed-GP model to a data CSV")
    p_fit.add_argument("data", help="CSV with d coordinate columns then one value column")
    _add_relaxation_options(p_fit)
    _add_smoothness(p_fit)
    p_fit.add_argument("--out-dir", default=".")
    p_fit.add_argument("--no-figures", action="store_true")
    p_fit.set_defaults(func=_cmd_fit)

    p_score = sub.add_parser("score", help="leave-one-out truncated-CRPS report")
    p_score.add_argument("data")
    _add_relaxation_options(p_score)
    _add_smoothness(p_score)
    q = p_score.add_mutually_exclusive_group()
    q.add_argument("--q-below", type=float, metavar="T0",
                   help="score on the range (-inf, T0)")
    q.add_argument("--q-between", type=float, nargs=2, metavar=("A", "B"),
                   help="score on the range (A, B)")
    p_score.add_argument("--out-dir", default=".")
    p_score.set_defaults(func=_cmd_score)

    p_opt = sub.add_parser("optimize", help="single optimization run (live CSV trace)")
    p_opt.add_argument("--problem", required=True, choices=problem_names())
    p_opt.add_argument("--dimension", type=int)
    p_opt.add_argument("--algorithm", default="ego-r-constant", choices=ALGORITHMS)
    p_opt.add_argument("--budget", type=int, default=100)
    p_opt.add_argument("--seed", type=int, default=0)
    p_opt.add_argument("--alpha", type=float, default=0.25)
    p_opt.add_argument("--grid-size", type=int, default=10)
    p_opt.add_argument("--n0-multiplier", type=int, default=3)
    _add_smoothness(p_opt)
    p_opt.add_argument("--out-dir")
    p_opt.add_argument("--no-figures", action="store_true")
    p_opt.set_defaults(func=_cmd_optimize)

    p_bench = sub.add_parser("benchmark", help="run a benchmark batch from a config file")
    p_bench.add_argument("config")
    p_bench.add_argument("--out-dir", default="bench-out")
    p_bench.add_argument("--jobs", type=int, default=1)
    p_bench.add_argument("--no-figures", action="store_true")
    p_bench.set_defaults(func=_cmd_benchmark)

    p_targets = sub.add_parser("targets", help="spatial-quantile targets of a problem")
    p_targets.add_argument("--problem", required=True, choices=problem_names())
    p_targets.add_argument("--dimension", type=int)
    p_targets.add_argument("--levels", default="0.25,0.1,0.05,0.02,0.01,0.005,0.002")
    p_targets.add_argument("--n-mc", type=int, default=100_000)
    p_targets.add_argument("--seed", type=int, default=0)
    p_targets.add_argument("--out")
    p_targets.set_defaults(func=_cmd_targets)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RegpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
