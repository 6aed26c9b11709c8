"""dynident: identification of nonlinear dynamical systems from noisy
time-series data, with Gaussian-Bayesian solvers (closed-form posterior,
joint-MAP and variational hyperparameter estimation) next to classical
sparse-regression baselines."""

from .baselines import BaselineResult, lasso, least_squares, ridge, stlsq
from .features import ALPHABETS, LibraryMatrix, LibrarySpec, build_library, term_count
from .gauss_bayes import (
    GaussianBelief,
    NoiseCov,
    NumericalBreakdownError,
    evidence,
    gamma_laplace_update,
    gaussian_norm,
    log_density,
    map_objective,
    posterior,
)
from .hyper_est import FitState, IGParams, SweepRecord, SweepTrace, jmap_fit, outer_sweep, vba_fit
from .metrics import MetricSet, error_bar, information_criteria, information_criteria_2norm, log_por
from .pipeline import (
    IdentifiedModel,
    ResimResult,
    RunConfig,
    divergence_time,
    identify,
    report,
    resimulate,
)
from .systems import (
    NoiseSpec,
    SystemParams,
    TimeSeries,
    add_noise,
    derivatives_from_noisy,
    integrate,
    rhs,
    true_coefficients,
)

__version__ = "0.1.0"
