"""Matplotlib renderings of the diagnostic and benchmark outputs.

Every CLI report path saves a figure next to its delimited output.  All
functions take an output path and write a PNG; nothing is shown
interactively (the Agg backend is forced so headless runs work).
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_transform_figure",
    "save_fit_figure_1d",
    "save_progress_figure",
    "save_benchmark_figure",
]

_ALGO_COLORS = {
    "ego": "tab:red",
    "ego-r-constant": "tab:blue",
    "ego-r-concentration": "tab:green",
    "random": "0.5",
}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_transform_figure(values, relaxed_values, path, thresholds=(), title=None):
    """Observed values against their relaxed counterparts.

    The identity line marks untouched observations; horizontal lines mark
    the relaxation thresholds.
    """
    values = np.asarray(values, dtype=float)
    relaxed_values = np.asarray(relaxed_values, dtype=float)
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    lo = min(values.min(), relaxed_values.min())
    hi = max(values.max(), relaxed_values.max())
    pad = 0.05 * (hi - lo if hi > lo else 1.0)
    line = np.array([lo - pad, hi + pad])
    ax.plot(line, line, color="0.7", lw=1, label="identity")
    moved = ~np.isclose(values, relaxed_values)
    ax.scatter(values[~moved], relaxed_values[~moved], s=22, color="k", label="fixed")
    if moved.any():
        ax.scatter(values[moved], relaxed_values[moved], s=26, color="tab:blue",
                   label="relaxed")
    for t in thresholds:
        if t is not None and math.isfinite(t):
            ax.axhline(t, color="tab:brown", lw=0.8, ls="--")
    ax.set_xlabel("observed value")
    ax.set_ylabel("relaxed value")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    _finish(fig, path)


def save_fit_figure_1d(model, domain, path, true_function=None, threshold=None,
                       n_grid=400, title=None):
    """Predictive mean and 95% band of a 1-d fit, with the data."""
    grid = np.linspace(domain.lower[0], domain.upper[0], n_grid)[:, None]
    means, variances = model.predict_batch(grid)
    sd = np.sqrt(variances)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.fill_between(grid[:, 0], means - 1.96 * sd, means + 1.96 * sd,
                    color="0.85", label="95% band")
    ax.plot(grid[:, 0], means, color="tab:red", lw=1.2, label="predictive mean")
    if true_function is not None:
        truth = np.array([true_function(x) for x in grid])
        ax.plot(grid[:, 0], truth, color="k", lw=0.8, ls="--", label="objective")
    x = model.data.points[:, 0]
    ax.scatter(x, model.data.values, marker="s", s=25, color="k", label="data")
    moved = ~np.isclose(model.data.values, model.relaxed_values)
    if moved.any():
        ax.scatter(x[moved], model.relaxed_values[moved], s=25, color="tab:blue",
                   label="relaxed data")
    if threshold is not None and math.isfinite(threshold):
        ax.axhline(threshold, color="k", lw=0.9)
    ax.set_xlabel("x")
    ax.set_ylabel("value")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    _finish(fig, path)


def save_progress_figure(traces_by_label, path, title=None):
    """Best-so-far curves of one or several runs."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, trace in traces_by_label.items():
        best = trace.best_values()
        color = _ALGO_COLORS.get(label)
        ax.plot(np.arange(1, best.size + 1), best, label=label, color=color)
    ax.set_xlabel("evaluations")
    ax.set_ylabel("best value")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    _finish(fig, path)


def save_benchmark_figure(summary_rows, path, title=None):
    """Mean evaluations-to-target and success fraction versus target level.

    One line per algorithm, levels decreasing to the right (harder
    targets), mirroring the layout of the benchmark reports.
    """
    algorithms = sorted({row.algorithm for row in summary_rows})
    fig, (ax_ev, ax_sf) = plt.subplots(
        2, 1, figsize=(6.0, 6.2), sharex=True, height_ratios=[2, 1]
    )
    for algorithm in algorithms:
        rows = sorted(
            (row for row in summary_rows if row.algorithm == algorithm),
            key=lambda row: -row.target_level,
        )
        levels = [row.target_level for row in rows]
        color = _ALGO_COLORS.get(algorithm)
        ax_ev.plot(levels, [row.mean_evaluations for row in rows],
                   marker="o", ms=3, label=algorithm, color=color)
        ax_sf.plot(levels, [row.success_fraction for row in rows],
                   marker="o", ms=3, label=algorithm, color=color)
    ax_sf.axhline(2.0 / 3.0, color="k", lw=0.8, ls="--")
    for ax in (ax_ev, ax_sf):
        ax.set_xscale("log")
        ax.invert_xaxis()
    ax_ev.set_ylabel("mean evaluations to target")
    ax_sf.set_ylabel("success fraction")
    ax_sf.set_ylim(-0.05, 1.05)
    ax_sf.set_xlabel("spatial quantile level")
    if title:
        ax_ev.set_title(title)
    ax_ev.legend(frameon=False, fontsize=8)
    _finish(fig, path)
