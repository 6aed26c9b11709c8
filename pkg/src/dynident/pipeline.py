"""End-to-end identification runs: configuration, columnwise solving,
re-simulation of identified models, and file reporting.

A run generates a trajectory, corrupts it with seeded noise, rebuilds
derivative data from the noisy states, evaluates the candidate library and
then solves each state dimension independently with the configured
algorithm over its hyperparameter grid.  Per-column optima are picked by
the minimum posterior Gaussian norm for the Bayesian algorithms, by the
turning point of the log residual for thresholded/ridge regression, and by
the turning point of the log objective for the LASSO.

Reports are plain CSV (RFC-4180 quoting, LF endings, 17 significant
digits) plus a flat ``key = value`` manifest that records every resolved
parameter; the manifest doubles as a config file for later commands.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from . import baselines, hyper_est, metrics, systems
from .features import ALPHABETS, LibraryMatrix, LibrarySpec, build_library, exponent_tuples
from .hyper_est import IGParams, SweepTrace
from .systems import NoiseSpec, SystemParams, TimeSeries

ALGORITHMS = ("ls", "ridge", "lasso", "stlsq", "jmap", "vba")

#: Fixed column order of the per-column trace CSV.
TRACE_COLUMNS = [
    "k", "hyper", "residual2", "reg2", "psi", "objective",
    "norm_lik", "norm_prior", "norm_post", "norm_evid_direct", "norm_evid_bayes",
    "aic", "bic", "aicc", "aic2", "bic2", "aicc2", "eb", "inner_iters", "flags",
]

#: State magnitude beyond which a re-simulation is truncated and flagged.
BLOWUP_LIMIT = 1e6

#: Default hyperparameter grids (descending, log-spaced).  The Bayesian
#: error-variance grid spans 1e4..1e-8; the ridge grid reaches far enough
#: down for the residual to hit its numerical floor, which is where its
#: turning point lives on consistency-level data.
_DEFAULT_GRIDS = {
    "ls": (1.0,),
    "ridge": (1e4, 1e-14, 25),
    "lasso": (1e4, 1e-4, 25),
    "stlsq": (1e1, 1e-5, 25),
    "jmap": (1e4, 1e-8, 25),
    "vba": (1e4, 1e-8, 25),
}


def default_grid(algo: str) -> np.ndarray:
    spec = _DEFAULT_GRIDS[algo]
    if len(spec) == 1:
        return np.asarray(spec, dtype=float)
    start, stop, count = spec
    return np.geomspace(start, stop, int(count))


@dataclass
class RunConfig:
    """Every knob of an identification run; unset fields resolve to the
    documented defaults (see :meth:`resolved`)."""

    system: str = "lorenz"
    T: float = 10.0
    t_step: float = 0.01
    noise: str = "gaussian"
    eps: float = 0.2
    seed: int = 0
    alphabet: str = "poly2"
    algo: str = "stlsq"
    grid: tuple | None = None
    eval_point: str = "truth"
    out: str | None = None
    x0: tuple | None = None
    params: SystemParams | None = None
    rtol: float = 1e-9
    atol: float = 1e-9
    alpha_eps: float = hyper_est.DEFAULT_ALPHA_EPS
    alpha_xi: float = hyper_est.DEFAULT_ALPHA_XI
    e_xi: float = hyper_est.DEFAULT_E_XI
    inner_tol: float = hyper_est.DEFAULT_INNER_TOL
    max_inner: int = hyper_est.DEFAULT_MAX_INNER
    select_index: int | None = None

    def resolved(self) -> "RunConfig":
        """Fill defaults and validate; returns a new config."""
        if self.system not in systems.SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.alphabet not in ALPHABETS:
            raise ValueError(f"unknown alphabet {self.alphabet!r}")
        if self.eval_point not in ("truth", "estimate"):
            raise ValueError("eval_point must be 'truth' or 'estimate'")
        params = self.params or SystemParams.default(self.system)
        if params.system != self.system:
            raise ValueError("params do not match the configured system")
        x0 = tuple(self.x0) if self.x0 is not None else systems.DEFAULT_X0[self.system]
        grid = tuple(float(g) for g in (self.grid if self.grid is not None else default_grid(self.algo)))
        if len(grid) == 0:
            raise ValueError("hyperparameter grid must be nonempty")
        if any(g <= 0 for g in grid) or any(b >= a for a, b in zip(grid, grid[1:])):
            raise ValueError("hyperparameter grid must be positive and strictly descending")
        return replace(self, params=params, x0=x0, grid=grid)

    @property
    def library_spec(self) -> LibrarySpec:
        return ALPHABETS[self.alphabet]

    @property
    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(family=self.noise, eps=self.eps, seed=self.seed)


@dataclass
class RunData:
    """Raw material of a run: clean series, noisy states, derivative data
    (from the noisy states) and the evaluated library."""

    series: TimeSeries
    X_noisy: np.ndarray
    Xdot: np.ndarray
    library: LibraryMatrix


@dataclass
class ColumnSweep:
    """Per-column hyperparameter sweep in CSV-ready form."""

    rows: list[dict]
    chosen_index: int
    trace: SweepTrace | None = field(default=None, repr=False)
    results: list[baselines.BaselineResult] | None = field(default=None, repr=False)


@dataclass
class IdentifiedModel:
    """Identified coefficient matrix with per-coefficient uncertainty (for
    the Bayesian algorithms) and the sweeps that produced it."""

    xi_hat: np.ndarray
    sigma_hat: np.ndarray | None
    labels: list[str]
    sweeps: list[ColumnSweep]
    chosen_hyper: list[float]
    column_flags: list[tuple[str, ...]]
    truth: np.ndarray
    config: RunConfig
    data: RunData = field(repr=False, default=None)
    timings: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.xi_hat.shape[1]


def turning_point_index(values, grid) -> int:
    """Grid index maximizing the discrete second difference of log(values)
    over the (log-spaced) grid; the discrete analogue of the curve's
    sharpest elbow.  Short grids fall back to the plain minimum."""
    v = np.log(np.maximum(np.asarray(values, dtype=float), 1e-300))
    if v.size < 3:
        return int(np.argmin(v))
    d2 = v[2:] - 2.0 * v[1:-1] + v[:-2]
    return int(np.argmax(d2)) + 1


def generate_data(config: RunConfig) -> RunData:
    """Integrate, add noise, rebuild derivatives, evaluate the library."""
    cfg = config.resolved()
    series = systems.integrate(cfg.params, cfg.x0, cfg.T, cfg.t_step, cfg.rtol, cfg.atol)
    X_noisy = systems.add_noise(series.X, cfg.noise_spec)
    Xdot = systems.derivatives_from_noisy(cfg.params, X_noisy)
    library = build_library(X_noisy, cfg.library_spec)
    return RunData(series=series, X_noisy=X_noisy, Xdot=Xdot, library=library)


def identify(config: RunConfig) -> IdentifiedModel:
    """Run the configured algorithm columnwise and assemble the model."""
    cfg = config.resolved()
    t_start = time.perf_counter()
    data = generate_data(cfg)
    t_data = time.perf_counter()
    H = data.library.H
    m, c = H.shape
    n = data.series.n
    truth = systems.true_coefficients(cfg.params, cfg.library_spec)
    grid = np.asarray(cfg.grid)
    bayesian = cfg.algo in ("jmap", "vba")

    xi_hat = np.zeros((c, n))
    sigma_hat = np.full((c, n), np.nan) if bayesian else None
    sweeps: list[ColumnSweep] = []
    chosen_hyper: list[float] = []
    column_flags: list[tuple[str, ...]] = []
    for j in range(n):
        y = data.Xdot[:, j]
        if bayesian:
            sweep = _bayes_column(cfg, H, y, truth[:, j], grid)
        else:
            sweep = _baseline_column(cfg, H, y, grid)
        idx = sweep.chosen_index
        sweeps.append(sweep)
        chosen_hyper.append(float(grid[idx]))
        if bayesian:
            rec = sweep.trace.records[idx]
            xi_hat[:, j] = rec.fit.xi
            if rec.fit.post is not None:
                sigma_hat[:, j] = np.sqrt(np.diag(rec.fit.post.cov))
            # evidence diagnostics stay in the trace rows; only fit-state
            # breakdowns disqualify the column's coefficients
            column_flags.append(tuple(sorted(rec.fit.breakdown)))
        else:
            res = sweep.results[idx]
            xi_hat[:, j] = res.xi
            flags = []
            if not res.converged:
                flags.append("non-converged")
            if res.degenerate:
                flags.append("degenerate")
            column_flags.append(tuple(flags))
    timings = {
        "data_seconds": t_data - t_start,
        "solve_seconds": time.perf_counter() - t_data,
    }
    return IdentifiedModel(
        xi_hat=xi_hat,
        sigma_hat=sigma_hat,
        labels=list(data.library.labels),
        sweeps=sweeps,
        chosen_hyper=chosen_hyper,
        column_flags=column_flags,
        truth=truth,
        config=cfg,
        data=data,
        timings=timings,
    )


def _bayes_column(cfg: RunConfig, H, y, truth_col, grid) -> ColumnSweep:
    ig_xi = IGParams.from_mean(cfg.e_xi, cfg.alpha_xi)
    eval_pt = truth_col if cfg.eval_point == "truth" else None
    trace = hyper_est.outer_sweep(
        H, y, cfg.algo, grid, ig_xi,
        eval_point=eval_pt, alpha_eps=cfg.alpha_eps,
        tol=cfg.inner_tol, max_inner=cfg.max_inner,
    )
    rows = [
        {
            "k": r.k, "hyper": r.e_eps, "residual2": r.residual2, "reg2": r.reg2,
            "psi": r.psi, "objective": r.objective,
            "norm_lik": r.norm_lik, "norm_prior": r.norm_prior, "norm_post": r.norm_post,
            "norm_evid_direct": r.norm_evid_direct, "norm_evid_bayes": r.norm_evid_bayes,
            "aic": r.metric_set.aic, "bic": r.metric_set.bic, "aicc": r.metric_set.aicc,
            "aic2": r.metric_set.aic2, "bic2": r.metric_set.bic2, "aicc2": r.metric_set.aicc2,
            "eb": r.metric_set.eb, "inner_iters": r.inner_iterations,
            "flags": ";".join(r.flags),
        }
        for r in trace.records
    ]
    idx = cfg.select_index if cfg.select_index is not None else trace.chosen_index
    return ColumnSweep(rows=rows, chosen_index=idx, trace=trace)


def _baseline_column(cfg: RunConfig, H, y, grid) -> ColumnSweep:
    m, c = H.shape
    results = []
    # the coordinate-descent optimality residual lives on the gradient
    # scale, so the stopping tolerance follows the data magnitude; the
    # descending path is warm-started point to point
    lasso_tol = 1e-10 * max(1.0, 2.0 * float(np.max(np.abs(H.T @ y))))
    warm = None
    for g in grid:
        if cfg.algo == "ls":
            results.append(baselines.least_squares(H, y))
        elif cfg.algo == "ridge":
            results.append(baselines.ridge(H, y, g))
        elif cfg.algo == "lasso":
            res = baselines.lasso(H, y, g, tol=lasso_tol, xi0=warm)
            warm = res.xi
            results.append(res)
        else:
            results.append(baselines.stlsq(H, y, g))
    rows = []
    for k, (g, res) in enumerate(zip(grid, results)):
        aic2, bic2, aicc2 = metrics.information_criteria_2norm(res.residual2, m, c)
        flags = []
        if not res.converged:
            flags.append("non-converged")
        if res.degenerate:
            flags.append("degenerate")
        rows.append(
            {
                "k": k, "hyper": g, "residual2": res.residual2, "reg2": res.reg_term,
                "psi": g, "objective": res.objective,
                "norm_lik": None, "norm_prior": None, "norm_post": None,
                "norm_evid_direct": None, "norm_evid_bayes": None,
                "aic": None, "bic": None, "aicc": None,
                "aic2": aic2, "bic2": bic2, "aicc2": aicc2,
                "eb": None, "inner_iters": res.inner_iterations,
                "flags": ";".join(flags),
            }
        )
    if cfg.select_index is not None:
        idx = cfg.select_index
    elif cfg.algo == "ls" or len(grid) == 1:
        idx = 0
    elif cfg.algo == "lasso":
        idx = turning_point_index([r.objective for r in results], grid)
    else:
        idx = turning_point_index([r.residual2 for r in results], grid)
    return ColumnSweep(rows=rows, chosen_index=idx, results=results)


@dataclass
class ResimResult:
    """Re-simulated trajectory; ``blowup_time`` is set when the state grew
    beyond the divergence limit and the series was truncated there."""

    series: TimeSeries
    blowup_time: float | None = None


def resimulate(
    model: IdentifiedModel, x0, T: float, t_step: float,
    rtol: float = 1e-9, atol: float = 1e-9,
) -> ResimResult:
    """Integrate the identified vector field xdot = h(x) Xi-hat on the same
    kind of uniform grid and with the same integrator as the source data."""
    flagged = [j for j, f in enumerate(model.column_flags) if f]
    if flagged:
        raise ValueError(f"model columns {flagged} are flagged; refusing to re-simulate")
    spec = model.config.library_spec
    n = model.n
    exps = np.asarray(exponent_tuples(spec, n), dtype=float)
    xi = model.xi_hat

    def fun(_t, x):
        h = np.prod(x[None, :] ** exps, axis=1)
        return h @ xi

    def blowup(_t, x):
        return BLOWUP_LIMIT - float(np.max(np.abs(x)))

    blowup.terminal = True
    m = int(round(T / t_step)) + 1
    t = np.arange(m) * t_step
    sol = solve_ivp(
        fun, (t[0], t[-1]), np.asarray(x0, dtype=float),
        method="RK45", t_eval=t, rtol=rtol, atol=atol, events=[blowup],
    )
    if sol.t_events[0].size:
        t_blow = float(sol.t_events[0][0])
        keep = sol.t.size
        series = TimeSeries(t=t[:keep], X=sol.y.T)
        return ResimResult(series=series, blowup_time=t_blow)
    if not sol.success:
        raise systems.IntegrationError(
            f"re-simulation failed at t={sol.t[-1] if sol.t.size else t[0]}"
        )
    return ResimResult(series=TimeSeries(t=t, X=sol.y.T))


def divergence_time(true: TimeSeries, pred: TimeSeries, frac: float) -> float:
    """First time at which the prediction leaves a band of width frac times
    the componentwise range of the true series; end time if it never does."""
    if not 0 < frac < 1:
        raise ValueError("frac must lie strictly between 0 and 1")
    if true.m != pred.m or np.max(np.abs(true.t - pred.t)) > 1e-9 * max(true.t_step, 1e-300):
        raise ValueError("time grids do not match")
    ranges = np.maximum(np.ptp(true.X, axis=0), 1e-300)
    rel = np.abs(pred.X - true.X) / ranges
    exceeded = np.flatnonzero(np.max(rel, axis=1) > frac)
    return float(true.t[exceeded[0]]) if exceeded.size else float(true.t[-1])


# ---------------------------------------------------------------- reporting

def format_float(x) -> str:
    """Decimal text with 17 significant digits (round-trips float64)."""
    return format(float(x), ".17g")


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    f = float(x)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "-inf" if f < 0 else "inf"
    return format_float(f)


def _write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def config_lines(cfg: RunConfig) -> list[str]:
    """The resolved configuration as flat ``key = value`` lines."""
    lines = [
        f"system = {cfg.system}",
        f"params = {','.join(format_float(v) for v in cfg.params.values)}",
        f"x0 = {','.join(format_float(v) for v in cfg.x0)}",
        f"T = {format_float(cfg.T)}",
        f"dt = {format_float(cfg.t_step)}",
        f"noise = {cfg.noise}",
        f"eps = {format_float(cfg.eps)}",
        f"seed = {cfg.seed}",
        f"alphabet = {cfg.alphabet}",
        f"algo = {cfg.algo}",
        f"grid = {':'.join(format_float(v) for v in cfg.grid)}",
        f"eval_point = {cfg.eval_point}",
        f"rtol = {format_float(cfg.rtol)}",
        f"atol = {format_float(cfg.atol)}",
        f"alpha_eps = {format_float(cfg.alpha_eps)}",
        f"alpha_xi = {format_float(cfg.alpha_xi)}",
        f"e_xi = {format_float(cfg.e_xi)}",
        f"inner_tol = {format_float(cfg.inner_tol)}",
        f"max_inner = {cfg.max_inner}",
    ]
    if cfg.select_index is not None:
        lines.append(f"select_index = {cfg.select_index}")
    if cfg.out is not None:
        lines.append(f"out = {cfg.out}")
    return lines


def write_manifest(model: IdentifiedModel, out_dir: Path, extra: dict | None = None) -> Path:
    cfg = model.config
    m = model.data.series.m if model.data is not None else 0
    lines = ["# dynident run manifest", *config_lines(cfg), f"samples = {m}"]
    for j in range(model.n):
        lines.append(f"chosen_index_x{j + 1} = {model.sweeps[j].chosen_index}")
        lines.append(f"chosen_hyper_x{j + 1} = {format_float(model.chosen_hyper[j])}")
        lines.append(f"flags_x{j + 1} = {';'.join(model.column_flags[j])}")
    for key, val in model.timings.items():
        lines.append(f"timing.{key} = {format_float(val)}")
    for key, val in (extra or {}).items():
        lines.append(f"{key} = {val}")
    path = out_dir / "manifest.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def report(model: IdentifiedModel, out_dir, resim: ResimResult | None = None) -> dict[str, Path]:
    """Write the manifest, per-column trace CSVs, the coefficient table and
    (when a re-simulation is supplied) the trajectory comparison CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files: dict[str, Path] = {}
    extra = {}
    if resim is not None and resim.blowup_time is not None:
        extra["resim_blowup_time"] = format_float(resim.blowup_time)
    files["manifest"] = write_manifest(model, out_dir, extra)

    for j in range(model.n):
        path = out_dir / f"trace_x{j + 1}.csv"
        rows = [[row[col] for col in TRACE_COLUMNS] for row in model.sweeps[j].rows]
        _write_csv(path, TRACE_COLUMNS, rows)
        files[f"trace_x{j + 1}"] = path

    n = model.n
    header = (
        ["label"]
        + [f"true_x{j + 1}" for j in range(n)]
        + [f"est_x{j + 1}" for j in range(n)]
        + [f"sigma_x{j + 1}" for j in range(n)]
    )
    rows = []
    for l, label in enumerate(model.labels):
        row = [label]
        row += [model.truth[l, j] for j in range(n)]
        row += [model.xi_hat[l, j] for j in range(n)]
        if model.sigma_hat is not None:
            row += [model.sigma_hat[l, j] for j in range(n)]
        else:
            row += [None] * n
        rows.append(row)
    files["coefficients"] = out_dir / "coefficients.csv"
    _write_csv(files["coefficients"], header, rows)

    if resim is not None and model.data is not None:
        files["trajectory"] = out_dir / "trajectory.csv"
        _write_trajectory(files["trajectory"], model, resim)
    return files


def _write_trajectory(path: Path, model: IdentifiedModel, resim: ResimResult) -> None:
    noisy = model.data.X_noisy
    t = model.data.series.t
    mP = resim.series.m
    n = model.n
    header = (
        ["t"]
        + [f"noisy_x{j + 1}" for j in range(n)]
        + [f"pred_x{j + 1}" for j in range(n)]
        + [f"diff_x{j + 1}" for j in range(n)]
    )
    rows = []
    for i in range(min(mP, t.size)):
        pred = resim.series.X[i]
        obs = noisy[i]
        rows.append([t[i], *obs, *pred, *(obs - pred)])
    _write_csv(path, header, rows)


def write_timeseries(data: RunData, out_dir) -> Path:
    """CSV of the simulated data: clean states, noisy states, derivatives."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = data.series.n
    header = (
        ["t"]
        + [f"x{j + 1}" for j in range(n)]
        + [f"noisy_x{j + 1}" for j in range(n)]
        + [f"xdot_x{j + 1}" for j in range(n)]
    )
    rows = [
        [data.series.t[i], *data.series.X[i], *data.X_noisy[i], *data.Xdot[i]]
        for i in range(data.series.m)
    ]
    path = out_dir / "timeseries.csv"
    _write_csv(path, header, rows)
    return path
