"""Closed-form Gaussian inference for the columnwise regression problem.

With a Gaussian likelihood (diagonal noise covariance) and Gaussian prior,
the posterior and evidence are Gaussian with known mean and covariance.
All covariance algebra goes through Cholesky factorizations: the posterior
covariance is obtained by factoring the precision matrix once (never by a
double inversion), log-determinants come from factor diagonals so that the
normalization terms do not underflow, and an indefinite factorization gets
one jitter retry before a :class:`NumericalBreakdownError` is raised.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)

#: Relative diagonal jitter attempted once before declaring a factorization
#: breakdown.
JITTER_REL = 1e-12


class NumericalBreakdownError(RuntimeError):
    """A symmetric factorization failed (indefinite or singular matrix).

    Carries the sign/log-magnitude of the offending determinant so callers
    can report how far gone the matrix was.
    """

    def __init__(self, message: str, logdet: float, sign: float):
        super().__init__(f"{message} (det sign {sign:+.0f}, log|det| {logdet:.3g})")
        self.logdet = logdet
        self.sign = sign


@dataclass
class GaussianBelief:
    """Mean vector and covariance matrix of a Gaussian distribution."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).ravel()
        self.cov = np.asarray(self.cov, dtype=float)
        k = self.mean.size
        if self.cov.shape != (k, k):
            raise ValueError("covariance must be square and match the mean")
        scale = np.max(np.abs(self.cov)) or 1.0
        if np.max(np.abs(self.cov - self.cov.T)) > 1e-10 * scale:
            raise ValueError("covariance must be symmetric")
        shifted = self.cov + (1e-14 * np.trace(self.cov) / k) * np.eye(k)
        try:
            np.linalg.cholesky(shifted)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive semi-definite") from None

    @property
    def k(self) -> int:
        return self.mean.size


@dataclass
class NoiseCov:
    """Diagonal noise covariance: one error variance per sample."""

    diag: np.ndarray

    def __post_init__(self):
        self.diag = np.asarray(self.diag, dtype=float).ravel()
        if self.diag.size == 0 or np.any(self.diag <= 0) or not np.all(np.isfinite(self.diag)):
            raise ValueError("noise variances must be finite and positive")


def gaussian_norm(v, precision) -> float:
    """Quadratic form v^T precision v (the Mahalanobis square)."""
    v = np.asarray(v, dtype=float).ravel()
    precision = np.asarray(precision, dtype=float)
    if precision.shape != (v.size, v.size):
        raise ValueError("precision matrix does not match the vector length")
    scale = np.max(np.abs(precision)) or 1.0
    if np.max(np.abs(precision - precision.T)) > 1e-10 * scale:
        raise ValueError("precision matrix must be symmetric")
    return float(v @ precision @ v)


def chol_factor(A: np.ndarray, what: str = "matrix"):
    """Cholesky factorization with one jitter retry.

    Returns ``(factor, logdet, jittered)`` where ``factor`` feeds
    ``scipy.linalg.cho_solve`` and ``logdet`` is of A itself.  Raises
    :class:`NumericalBreakdownError` when even the jittered matrix is not
    positive definite.
    """
    A = np.asarray(A, dtype=float)
    try:
        cf = cho_factor(A, lower=True)
        return cf, 2.0 * float(np.sum(np.log(np.diag(cf[0])))), False
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_REL * float(np.mean(np.diag(A)))
    try:
        cf = cho_factor(A + jitter * np.eye(A.shape[0]), lower=True)
        logger.debug("jittered %s by %.3g to restore positive definiteness", what, jitter)
        return cf, 2.0 * float(np.sum(np.log(np.diag(cf[0])))), True
    except np.linalg.LinAlgError:
        sign, logdet = np.linalg.slogdet(A)
        raise NumericalBreakdownError(f"indefinite {what}", float(logdet), float(sign))


def _prior_precision(prior: GaussianBelief) -> np.ndarray:
    cov = prior.cov
    k = prior.k
    if np.count_nonzero(cov - np.diag(np.diag(cov))) == 0:
        d = np.diag(cov)
        if np.any(d <= 0):
            raise ValueError("prior covariance must be invertible")
        return np.diag(1.0 / d)
    cf, _, _ = chol_factor(cov, "prior covariance")
    return cho_solve(cf, np.eye(k))


def posterior_core(H, y, w_eps, w_xi, mu=None):
    """Posterior mean/covariance for diagonal precisions.

    ``w_eps`` and ``w_xi`` are inverse variances (per sample and per
    coefficient).  Returns ``(mean, cov, logdet_precision, jittered)``;
    the covariance comes from one Cholesky solve of the precision.
    """
    H = np.asarray(H, dtype=float)
    m, c = H.shape
    A = H.T @ (w_eps[:, None] * H) + np.diag(w_xi)
    A = 0.5 * (A + A.T)
    b = H.T @ (w_eps * y)
    if mu is not None:
        b = b + w_xi * mu
    cf, logdet, jittered = chol_factor(A, "posterior precision")
    cov = cho_solve(cf, np.eye(c))
    cov = 0.5 * (cov + cov.T)
    mean = cho_solve(cf, b)
    return mean, cov, logdet, jittered


def posterior(H, y, noise: NoiseCov, prior: GaussianBelief) -> GaussianBelief:
    """Gaussian posterior of the coefficients given data y = H xi + noise.

    cov = (H^T V_eps^-1 H + V_xi^-1)^-1 and mean = cov (H^T V_eps^-1 y +
    V_xi^-1 mu), both computed through a single symmetric factorization of
    the precision.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    m, c = H.shape
    if y.size != m or noise.diag.size != m or prior.k != c:
        raise ValueError("inconsistent dimensions between H, y, noise and prior")
    prior_prec = _prior_precision(prior)
    A = H.T @ (H / noise.diag[:, None]) + prior_prec
    A = 0.5 * (A + A.T)
    b = H.T @ (y / noise.diag) + prior_prec @ prior.mean
    cf, _, _ = chol_factor(A, "posterior precision")
    cov = cho_solve(cf, np.eye(c))
    cov = 0.5 * (cov + cov.T)
    mean = cho_solve(cf, b)
    return GaussianBelief(mean=mean, cov=cov)


def evidence(H, noise: NoiseCov, prior: GaussianBelief) -> GaussianBelief:
    """Gaussian marginal distribution of the data: mean H mu and covariance
    H V_xi H^T + V_eps."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    m, c = H.shape
    if noise.diag.size != m or prior.k != c:
        raise ValueError("inconsistent dimensions between H, noise and prior")
    cov = H @ prior.cov @ H.T + np.diag(noise.diag)
    return GaussianBelief(mean=H @ prior.mean, cov=0.5 * (cov + cov.T))


def log_density(belief: GaussianBelief, point) -> float:
    """Gaussian log-density at a point, with the log-determinant taken from
    Cholesky factor diagonals to avoid underflow of det(cov)."""
    point = np.asarray(point, dtype=float).ravel()
    if point.size != belief.k:
        raise ValueError("point does not match the belief dimension")
    cf, logdet, _ = chol_factor(belief.cov, "covariance")
    d = point - belief.mean
    maha = float(d @ cho_solve(cf, d))
    return -0.5 * maha - 0.5 * logdet - 0.5 * belief.k * LOG_2PI


def map_objective(xi, H, y, noise: NoiseCov, prior: GaussianBelief) -> float:
    """Full negative log-posterior at xi, including all determinant and
    constant terms.

    Assembled from the likelihood and prior Gaussian norms minus the
    evidence norm, plus the three log-determinants; equal (identically in
    xi) to ``-log_density(posterior(...), xi)``, which the tests exercise.
    """
    xi = np.asarray(xi, dtype=float).ravel()
    H = np.atleast_2d(np.asarray(H, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    m, c = H.shape
    r = y - H @ xi
    norm_lik = float(np.sum(r * r / noise.diag))
    prior_prec = _prior_precision(prior)
    d = xi - prior.mean
    norm_prior = float(d @ prior_prec @ d)
    ev = evidence(H, noise, prior)
    cf, logdet_ev, _ = chol_factor(ev.cov, "evidence covariance")
    e = y - ev.mean
    norm_ev = float(e @ cho_solve(cf, e))
    logdet_noise = float(np.sum(np.log(noise.diag)))
    _, logdet_prior, _ = chol_factor(prior.cov, "prior covariance")
    return (
        0.5 * (norm_lik + norm_prior - norm_ev)
        + 0.5 * (logdet_noise + logdet_prior - logdet_ev)
        + 0.5 * c * LOG_2PI
    )


def gamma_laplace_update(alpha: float, beta: float, samples, mu: float) -> tuple[float, float]:
    """Conjugate update of a gamma prior on the inverse Laplace scale.

    Observing n Laplace(mu, 1/zeta) samples turns Gamma(alpha, beta) into
    Gamma(alpha + n, beta + sum |x_i - mu|), with beta a rate parameter.
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("gamma hyperparameters must be positive")
    samples = np.asarray(samples, dtype=float).ravel()
    return alpha + samples.size, beta + float(np.sum(np.abs(samples - mu)))
