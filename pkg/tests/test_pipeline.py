import numpy as np
import pytest

from dynident import pipeline
from dynident.pipeline import (
    RunConfig,
    divergence_time,
    identify,
    report,
    resimulate,
    turning_point_index,
)
from dynident.systems import SystemParams, TimeSeries, integrate


def _tiny_config(**kw):
    base = dict(system="lorenz", T=1.0, t_step=0.01, eps=0.1, seed=5,
                alphabet="poly2", algo="ls")
    base.update(kw)
    return RunConfig(**base)


# ------------------------------------------------------------------ config

def test_config_resolution_defaults():
    cfg = RunConfig(algo="jmap").resolved()
    assert cfg.params.system == "lorenz"
    assert cfg.x0 == (-8.0, 7.0, 27.0)
    assert len(cfg.grid) == 25
    assert cfg.grid[0] == pytest.approx(1e4)
    assert cfg.grid[-1] == pytest.approx(1e-8)


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(system="nope").resolved()
    with pytest.raises(ValueError):
        RunConfig(algo="nope").resolved()
    with pytest.raises(ValueError):
        RunConfig(grid=(1.0, 2.0)).resolved()
    with pytest.raises(ValueError):
        RunConfig(grid=(1.0, -2.0)).resolved()
    with pytest.raises(ValueError):
        RunConfig(eval_point="sometimes").resolved()


# ---------------------------------------------------------- turning point

def test_turning_point_finds_elbow():
    grid = np.geomspace(1e2, 1e-6, 17)
    values = np.where(np.arange(17) < 6, 1e3, 1e-20)
    # the sharpest bend of the log-curve is the first low index
    assert turning_point_index(values, grid) == 6
    assert turning_point_index([3.0, 1.0], grid[:2]) == 1


# ---------------------------------------------------------------- identify

def test_identify_noiseless_least_squares_exact():
    cfg = _tiny_config(T=2.0, eps=0.0, algo="ls")
    model = identify(cfg)
    assert np.max(np.abs(model.truth - model.xi_hat)) <= 1e-10
    assert model.sigma_hat is None
    assert model.chosen_hyper == [1.0, 1.0, 1.0]


def test_identify_column_independence():
    cfg = _tiny_config(T=2.0, eps=0.2, algo="stlsq", grid=tuple(np.geomspace(1e1, 1e-5, 9)))
    model = identify(cfg)
    # re-solving one column standalone reproduces the model column
    from dynident.baselines import stlsq

    H = model.data.library.H
    y = model.data.Xdot[:, 1]
    res = stlsq(H, y, model.chosen_hyper[1])
    assert np.array_equal(res.xi, model.xi_hat[:, 1])


def test_identify_ridge_turning_point_recovers():
    cfg = _tiny_config(T=10.0, eps=0.2, algo="ridge")
    model = identify(cfg)
    assert np.max(np.abs(model.truth - model.xi_hat)) <= 1e-8
    # the selected index sits at the residual elbow, not at a grid edge
    for sweep in model.sweeps:
        assert 0 < sweep.chosen_index < len(sweep.rows) - 1


def test_stlsq_resimulation_diverges_by_chaos():
    # a near-perfect model tracks the truth for a while and then separates
    # at a finite time
    cfg = _tiny_config(T=10.0, eps=0.2, algo="stlsq")
    model = identify(cfg)
    assert np.max(np.abs(model.truth - model.xi_hat)) <= 1e-10
    horizon = 50.0
    truth = integrate(SystemParams.lorenz(), cfg.resolved().x0, horizon, 0.01)
    resim = resimulate(model, cfg.resolved().x0, horizon, 0.01)
    t_div = divergence_time(truth, resim.series, 0.1)
    assert 5.0 < t_div < horizon


def test_identify_bayes_produces_sigma_and_traces():
    cfg = _tiny_config(T=2.0, eps=0.2, algo="jmap", grid=tuple(np.geomspace(1e2, 1e-6, 9)))
    model = identify(cfg)
    assert model.sigma_hat is not None
    assert np.all(model.sigma_hat > 0)
    assert len(model.sweeps) == 3
    for sweep in model.sweeps:
        assert len(sweep.rows) == 9
        assert sweep.trace is not None


def test_identify_alphabet_growth_widens_error_bars():
    # adding unnecessary cubic terms must not shrink the error bars on the
    # true quadratic-library coefficients
    small = identify(_tiny_config(T=5.0, eps=0.2, algo="jmap", alphabet="poly2"))
    big = identify(_tiny_config(T=5.0, eps=0.2, algo="jmap", alphabet="poly3"))
    c_small = small.xi_hat.shape[0]
    mask = np.abs(small.truth) > 0
    s_small = small.sigma_hat[:c_small][mask]
    s_big = big.sigma_hat[:c_small][mask]
    assert np.all(s_big >= s_small * 0.999)


# -------------------------------------------------------------- resimulate

def test_resimulate_exact_model_tracks_integrator():
    cfg = _tiny_config(T=2.0, eps=0.0, algo="ls")
    model = identify(cfg)
    resim = resimulate(model, cfg.resolved().x0, 2.0, 0.01)
    assert resim.blowup_time is None
    ref = integrate(SystemParams.lorenz(), cfg.resolved().x0, 2.0, 0.01)
    assert np.max(np.abs(resim.series.X - ref.X)) <= 1e-5


def test_resimulate_zero_model_constant():
    cfg = _tiny_config(T=1.0, eps=0.0, algo="ls")
    model = identify(cfg)
    model.xi_hat = np.zeros_like(model.xi_hat)
    resim = resimulate(model, (1.0, 2.0, 3.0), 0.5, 0.1)
    assert np.allclose(resim.series.X, [1.0, 2.0, 3.0], atol=1e-12)


def test_resimulate_blowup_truncates_and_flags():
    cfg = _tiny_config(T=1.0, eps=0.0, algo="ls")
    model = identify(cfg)
    xi = np.zeros_like(model.xi_hat)
    xi[3, 0] = 1.0  # dx1/dt = x1^2 blows up in finite time from x1 = 1
    model.xi_hat = xi
    resim = resimulate(model, (1.0, 0.0, 0.0), 5.0, 0.001)
    assert resim.blowup_time is not None
    assert resim.blowup_time < 5.0
    assert resim.series.m < 5001
    assert np.all(np.abs(resim.series.X) <= 1e6 * 1.01)


def test_resimulate_refuses_flagged_columns():
    cfg = _tiny_config(T=1.0, eps=0.0, algo="ls")
    model = identify(cfg)
    model.column_flags = [("non-converged",), (), ()]
    with pytest.raises(ValueError):
        resimulate(model, (0.0, 0.0, 0.0), 1.0, 0.01)


# --------------------------------------------------------- divergence time

def test_divergence_time_identical_series():
    ts = integrate(SystemParams.lorenz(), (-8.0, 7.0, 27.0), 1.0, 0.01)
    assert divergence_time(ts, ts, 0.1) == pytest.approx(ts.t[-1])


def test_divergence_time_constant_offset():
    ts = integrate(SystemParams.lorenz(), (-8.0, 7.0, 27.0), 1.0, 0.01)
    ranges = np.ptp(ts.X, axis=0)
    shifted = TimeSeries(t=ts.t, X=ts.X + 0.2 * ranges)
    assert divergence_time(ts, shifted, 0.1) == ts.t[0]


def test_divergence_time_chaos_oracle():
    x0 = np.array([-8.0, 7.0, 27.0])
    truth = integrate(SystemParams.lorenz(), x0, 30.0, 0.01)
    pert = integrate(SystemParams.lorenz(), x0 + 1e-9, 30.0, 0.01)
    t_div = divergence_time(truth, pert, 0.1)
    assert 0.0 < t_div < 30.0


def test_divergence_time_grid_mismatch():
    ts = integrate(SystemParams.lorenz(), (-8.0, 7.0, 27.0), 1.0, 0.01)
    short = TimeSeries(t=ts.t[:-1], X=ts.X[:-1])
    with pytest.raises(ValueError):
        divergence_time(ts, short, 0.1)
    with pytest.raises(ValueError):
        divergence_time(ts, ts, 1.5)


# ------------------------------------------------------------------ report

def test_report_files_and_shapes(tmp_path):
    cfg = _tiny_config(T=1.0, eps=0.2, algo="jmap", grid=tuple(np.geomspace(1e2, 1e-6, 7)))
    model = identify(cfg)
    resim = resimulate(model, cfg.resolved().x0, 1.0, 0.01)
    files = report(model, tmp_path, resim=resim)
    for key in ("manifest", "coefficients", "trace_x1", "trace_x2", "trace_x3", "trajectory"):
        assert files[key].exists()
    trace_lines = files["trace_x1"].read_text().splitlines()
    assert trace_lines[0] == ",".join(pipeline.TRACE_COLUMNS)
    assert len(trace_lines) == 1 + 7
    coeff_lines = files["coefficients"].read_text().splitlines()
    assert len(coeff_lines) == 1 + len(model.labels)
    manifest = files["manifest"].read_text()
    assert "algo = jmap" in manifest
    assert "seed = 5" in manifest


def test_report_empty_trace_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    pipeline._write_csv(path, pipeline.TRACE_COLUMNS, [])
    assert path.read_text() == ",".join(pipeline.TRACE_COLUMNS) + "\n"


def test_report_deterministic_bytes(tmp_path):
    cfg = _tiny_config(T=1.0, eps=0.2, algo="jmap", grid=tuple(np.geomspace(1e2, 1e-6, 7)))
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    files_a = report(identify(cfg), out_a)
    files_b = report(identify(cfg), out_b)
    for key, path in files_a.items():
        if key == "manifest":  # timings differ by design
            continue
        assert path.read_bytes() == files_b[key].read_bytes()


def test_csv_float_format_round_trips():
    x = 0.1 + 0.2
    assert float(pipeline.format_float(x)) == x
    assert pipeline._cell(None) == ""
    assert pipeline._cell(float("nan")) == "nan"
    assert pipeline._cell(float("-inf")) == "-inf"
