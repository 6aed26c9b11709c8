"""Model-selection metrics.

Information criteria in their exact (log-likelihood) and 2-norm forms, the
error-bar score built from posterior coefficients of variation, and log
posterior odds ratios.  Undefined values (the small-sample correction when
m <= c + 2, the error bar of an all-zero estimate) are reported as NaN
rather than raised; a zero residual in the 2-norm forms yields the -inf
sentinel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gauss_bayes import GaussianBelief, chol_factor
from scipy.linalg import cho_solve

#: Coefficients with |xi_l| at or below this fraction of max|xi| count as
#: zero in the error-bar sum.
EB_ZERO_REL = 1e-12


@dataclass
class MetricSet:
    aic: float
    bic: float
    aicc: float
    aic2: float
    bic2: float
    aicc2: float
    eb: float
    log_por_abs: float


def information_criteria(loglik: float, m: int, c: int) -> tuple[float, float, float]:
    """(AIC, BIC, corrected AIC) from a maximized log-likelihood.

    The correction term requires m > c + 2; otherwise the corrected value
    is NaN.
    """
    aic = -2.0 * loglik + 2.0 * c
    bic = -2.0 * loglik + c * math.log(m)
    aicc = aic + 2.0 * (c + 1) * (c + 2) / (m - c - 2) if m > c + 2 else math.nan
    return aic, bic, aicc


def information_criteria_2norm(rss: float, m: int, c: int) -> tuple[float, float, float]:
    """2-norm approximations using log p ~ -(m/2) ln(rss/m).

    rss = 0 maps to -inf (a perfect fit dominates every comparison).
    """
    if rss < 0:
        raise ValueError("residual sum of squares must be nonnegative")
    if rss == 0.0:
        return -math.inf, -math.inf, -math.inf
    ln_term = m * math.log(rss / m)
    aic2 = ln_term + 2.0 * c
    bic2 = ln_term + c * math.log(m)
    aicc2 = aic2 + 2.0 * (c + 1) * (c + 2) / (m - c - 2) if m > c + 2 else math.nan
    return aic2, bic2, aicc2


def error_bar(post: GaussianBelief, xi) -> float:
    """Sum of squared posterior coefficients of variation over the nonzero
    coefficients; NaN when every coefficient is (relatively) zero."""
    xi = np.asarray(xi, dtype=float).ravel()
    if xi.size != post.k:
        raise ValueError("xi does not match the posterior dimension")
    scale = np.max(np.abs(xi))
    if scale == 0.0:
        return math.nan
    nz = np.abs(xi) > EB_ZERO_REL * scale
    if not np.any(nz):
        return math.nan
    return float(np.sum(np.diag(post.cov)[nz] / xi[nz] ** 2))


def log_por(post1: GaussianBelief, post2: GaussianBelief | None, at) -> float:
    """Log posterior odds ratio at a reference point.

    With two posteriors this is -1/2 (norm1 - norm2) of their Mahalanobis
    norms at ``at``; with ``post2`` omitted the absolute form -1/2 norm1.
    """
    at = np.asarray(at, dtype=float).ravel()
    norm1 = _post_norm(post1, at)
    if post2 is None:
        return -0.5 * norm1
    if post2.k != post1.k:
        raise ValueError("posteriors must share a dimension")
    return -0.5 * (norm1 - _post_norm(post2, at))


def _post_norm(post: GaussianBelief, at: np.ndarray) -> float:
    if at.size != post.k:
        raise ValueError("point does not match the posterior dimension")
    cf, _, _ = chol_factor(post.cov, "posterior covariance")
    d = at - post.mean
    return float(d @ cho_solve(cf, d))
