"""Figure rendering for run reports.

Figures are written straight to PNG files next to the CSV output: the
per-column sweep curves (2-norm terms, and the Gaussian norms for the
Bayesian algorithms), the coefficient-error chart with error bars, and the
data/prediction/difference triple plot when a re-simulation is available.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .pipeline import IdentifiedModel, ResimResult

_NORM_SERIES = [
    ("norm_lik", "likelihood"),
    ("norm_prior", "prior"),
    ("norm_post", "posterior"),
    ("norm_evid_direct", "evidence (direct)"),
    ("norm_evid_bayes", "evidence (Bayes)"),
]


def _column(rows, key):
    return np.array([np.nan if r[key] in (None, "") else float(r[key]) for r in rows])


def render_figures(model: IdentifiedModel, out_dir, resim: ResimResult | None = None) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [_sweep_figure(model, j, out_dir) for j in range(model.n)]
    paths.append(_coefficient_figure(model, out_dir))
    if resim is not None and model.data is not None:
        paths.append(_trajectory_figure(model, resim, out_dir))
    return paths


def _sweep_figure(model: IdentifiedModel, j: int, out_dir: Path) -> Path:
    rows = model.sweeps[j].rows
    hyper = _column(rows, "hyper")
    chosen = model.sweeps[j].chosen_index
    bayesian = model.config.algo in ("jmap", "vba")
    ncols = 2 if bayesian else 1
    fig, axes = plt.subplots(1, ncols, figsize=(6 * ncols, 4.2), squeeze=False)

    ax = axes[0][0]
    for key, label in [("residual2", "residual"), ("reg2", "regularization"), ("objective", "objective")]:
        ax.loglog(hyper, np.maximum(_column(rows, key), 1e-300), label=label)
    ax.axvline(hyper[chosen], color="0.4", ls="--", lw=1, label="optimum")
    ax.set_xlabel("hyperparameter")
    ax.set_ylabel("2-norm terms")
    ax.invert_xaxis()
    ax.legend(fontsize=8)

    if bayesian:
        ax = axes[0][1]
        for key, label in _NORM_SERIES:
            vals = _column(rows, key)
            ax.loglog(hyper, np.maximum(vals, 1e-300), label=label)
        ax.axvline(hyper[chosen], color="0.4", ls="--", lw=1)
        ax.set_xlabel("error-variance mean")
        ax.set_ylabel("Gaussian norms")
        ax.invert_xaxis()
        ax.legend(fontsize=8)

    fig.suptitle(f"{model.config.algo} sweep, state x{j + 1}")
    fig.tight_layout()
    path = out_dir / f"fig_sweep_x{j + 1}.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def _coefficient_figure(model: IdentifiedModel, out_dir: Path) -> Path:
    n = model.n
    c = len(model.labels)
    fig, axes = plt.subplots(n, 1, figsize=(max(6.0, 0.45 * c), 2.6 * n), sharex=True)
    axes = np.atleast_1d(axes)
    idx = np.arange(c)
    for j in range(n):
        ax = axes[j]
        err = model.truth[:, j] - model.xi_hat[:, j]
        if model.sigma_hat is not None:
            ax.errorbar(idx, err, yerr=model.sigma_hat[:, j], fmt="o", ms=3, capsize=2)
        else:
            ax.plot(idx, err, "o", ms=3)
        ax.axhline(0.0, color="0.6", lw=0.8)
        ax.set_ylabel(f"x{j + 1} error")
    axes[-1].set_xticks(idx)
    axes[-1].set_xticklabels(model.labels, rotation=60, fontsize=7)
    fig.suptitle("true minus estimated coefficients")
    fig.tight_layout()
    path = out_dir / "fig_coefficients.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def _trajectory_figure(model: IdentifiedModel, resim: ResimResult, out_dir: Path) -> Path:
    t = model.data.series.t
    noisy = model.data.X_noisy
    mP = resim.series.m
    fig, axes = plt.subplots(3, 1, figsize=(8, 7), sharex=True)
    for j in range(model.n):
        axes[0].plot(t, noisy[:, j], lw=0.6, label=f"x{j + 1}")
        axes[1].plot(resim.series.t, resim.series.X[:, j], lw=0.6)
        axes[2].plot(t[:mP], noisy[:mP, j] - resim.series.X[:, j], lw=0.6)
    axes[0].set_ylabel("data")
    axes[0].legend(fontsize=8)
    axes[1].set_ylabel("prediction")
    axes[2].set_ylabel("difference")
    axes[2].set_xlabel("t")
    fig.tight_layout()
    path = out_dir / "fig_trajectory.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
