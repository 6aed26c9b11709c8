"""Command-line interface.

Subcommands: ``simulate`` (write synthetic data), ``identify`` (run the
configured algorithm and write CSV reports), ``resim`` (re-integrate a
previously identified model against regenerated data) and ``report-all``
(identify, re-simulate and render figures in one pass).  Flags can also be
given in a flat ``key = value`` config file; command-line flags override
file values.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import pipeline, plots
from .pipeline import IdentifiedModel, RunConfig
from .systems import SystemParams


def parse_grid(text: str) -> tuple[float, ...]:
    """Parse "start:stop:count" into a descending log-spaced grid, or an
    explicit colon-separated list of values."""
    parts = text.split(":")
    if len(parts) == 3:
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            start = None
        if start is not None:
            if count < 1:
                raise ValueError("grid count must be at least 1")
            if count == 1:
                return (start,)
            if not start > stop > 0:
                raise ValueError("grid needs start > stop > 0 (log-spaced, descending)")
            return tuple(np.geomspace(start, stop, count))
    values = tuple(float(p) for p in parts)
    return values


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read flat ``key = value`` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


_CONFIG_KEYS = {
    "system": str,
    "T": float,
    "dt": float,
    "noise": str,
    "eps": float,
    "seed": int,
    "alphabet": str,
    "algo": str,
    "eval_point": str,
    "out": str,
    "rtol": float,
    "atol": float,
    "alpha_eps": float,
    "alpha_xi": float,
    "e_xi": float,
    "inner_tol": float,
    "max_inner": int,
    "select_index": int,
}


def config_from_mapping(mapping: dict[str, str]) -> RunConfig:
    kwargs = {}
    params_text = None
    for key, value in mapping.items():
        if key == "grid":
            kwargs["grid"] = parse_grid(value)
        elif key == "x0":
            kwargs["x0"] = tuple(float(v) for v in value.split(","))
        elif key == "params":
            params_text = value
        elif key == "samples" or key.startswith(("chosen_", "flags_", "timing.", "resim_")):
            continue  # manifest bookkeeping, not configuration
        elif key in _CONFIG_KEYS:
            kwargs["t_step" if key == "dt" else key] = _CONFIG_KEYS[key](value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    cfg = RunConfig(**kwargs)
    if params_text is not None:
        values = tuple(float(v) for v in params_text.split(","))
        cfg = replace(cfg, params=SystemParams(cfg.system, values))
    return cfg


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--system", choices=["lorenz", "vance", "shilnikov"])
    p.add_argument("--T", type=float, help="duration of the simulated series")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--eps", type=float, help="noise scale")
    p.add_argument("--noise", choices=["gaussian", "laplace"])
    p.add_argument("--seed", type=int)
    p.add_argument("--alphabet", choices=sorted(pipeline.ALPHABETS))
    p.add_argument("--algo", choices=list(pipeline.ALGORITHMS))
    p.add_argument("--grid", help="hyperparameter grid start:stop:count (log-spaced, descending)")
    p.add_argument("--eval-point", dest="eval_point", choices=["truth", "estimate"])
    p.add_argument("--x0", help="initial condition, comma-separated")
    p.add_argument("--out", help="output directory")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    mapping: dict[str, str] = {}
    if args.config:
        mapping.update(parse_config_file(args.config))
    for key in ("system", "T", "dt", "eps", "noise", "seed", "alphabet",
                "algo", "grid", "eval_point", "x0", "out"):
        val = getattr(args, key, None)
        if val is not None:
            mapping[key] = str(val)
    return config_from_mapping(mapping).resolved()


def _require_out(cfg: RunConfig) -> Path:
    if not cfg.out:
        raise SystemExit("an output directory is required (--out DIR)")
    return Path(cfg.out)


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    out = _require_out(cfg)
    data = pipeline.generate_data(cfg)
    path = pipeline.write_timeseries(data, out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(
        "# dynident simulation manifest\n" + "\n".join(pipeline.config_lines(cfg)) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {path} ({data.series.m} samples)")
    return 0


def cmd_identify(args) -> int:
    cfg = _config_from_args(args)
    out = _require_out(cfg)
    model = pipeline.identify(cfg)
    files = pipeline.report(model, out)
    _print_summary(model)
    print(f"report written to {files['manifest'].parent}")
    return 0


def cmd_resim(args) -> int:
    run_dir = Path(args.run)
    cfg, model = load_run(run_dir)
    T = args.T if args.T is not None else cfg.T
    t_step = args.dt if args.dt is not None else cfg.t_step
    x0 = tuple(float(v) for v in args.x0.split(",")) if args.x0 else cfg.x0
    model.data = pipeline.generate_data(cfg)
    resim = pipeline.resimulate(model, x0, T, t_step, cfg.rtol, cfg.atol)
    pipeline._write_trajectory(run_dir / "trajectory.csv", model, resim)
    if resim.blowup_time is not None:
        print(f"prediction blew up at t={resim.blowup_time:.6g}")
    upto = min(resim.series.m, model.data.series.m)
    tdiv = pipeline.divergence_time(
        pipeline.TimeSeries(t=model.data.series.t[:upto], X=model.data.series.X[:upto]),
        pipeline.TimeSeries(t=resim.series.t[:upto], X=resim.series.X[:upto]),
        frac=0.1,
    )
    print(f"wrote {run_dir / 'trajectory.csv'}; divergence time (10% band): {tdiv:.6g}")
    return 0


def cmd_report_all(args) -> int:
    cfg = _config_from_args(args)
    out = _require_out(cfg)
    model = pipeline.identify(cfg)
    resim = None
    if not any(model.column_flags):
        resim = pipeline.resimulate(model, cfg.x0, cfg.T, cfg.t_step, cfg.rtol, cfg.atol)
    files = pipeline.report(model, out, resim=resim)
    figures = plots.render_figures(model, out, resim=resim)
    _print_summary(model)
    print(f"report written to {files['manifest'].parent} ({len(figures)} figures)")
    return 0


def _print_summary(model: IdentifiedModel) -> None:
    err = np.max(np.abs(model.truth - model.xi_hat))
    print(f"algorithm {model.config.algo}: max |true - estimated| = {err:.3e}")
    for j in range(model.n):
        flags = ";".join(model.column_flags[j]) or "-"
        print(
            f"  x{j + 1}: optimum at k={model.sweeps[j].chosen_index} "
            f"(hyper={model.chosen_hyper[j]:.3e}, flags: {flags})"
        )


def load_run(run_dir: Path) -> tuple[RunConfig, IdentifiedModel]:
    """Rebuild a minimal model (coefficients plus configuration) from a run
    directory written by ``identify`` / ``report-all``."""
    cfg = config_from_mapping(parse_config_file(run_dir / "manifest.txt")).resolved()
    labels: list[str] = []
    with (run_dir / "coefficients.csv").open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    n = sum(1 for name in rows[0] if name.startswith("est_x"))
    xi = np.zeros((len(rows), n))
    truth = np.zeros((len(rows), n))
    for l, row in enumerate(rows):
        labels.append(row["label"])
        for j in range(n):
            xi[l, j] = float(row[f"est_x{j + 1}"])
            truth[l, j] = float(row[f"true_x{j + 1}"])
    model = IdentifiedModel(
        xi_hat=xi,
        sigma_hat=None,
        labels=labels,
        sweeps=[],
        chosen_hyper=[],
        column_flags=[()] * n,
        truth=truth,
        config=cfg,
        data=None,
    )
    return cfg, model


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dynident",
        description="Identify nonlinear dynamical systems from noisy time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a system and write the data CSV")
    _add_run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("identify", help="identify a model and write CSV reports")
    _add_run_flags(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("resim", help="re-simulate an identified model from a run directory")
    p.add_argument("--run", required=True, help="run directory written by identify")
    p.add_argument("--T", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--x0")
    p.set_defaults(func=cmd_resim)

    p = sub.add_parser("report-all", help="identify, re-simulate and render figures")
    _add_run_flags(p)
    p.set_defaults(func=cmd_report_all)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
