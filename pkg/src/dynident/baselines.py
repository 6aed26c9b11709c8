"""Classical solvers for the columnwise linear problem xdot_j = H xi_j.

All four solvers return a :class:`BaselineResult` whose objective follows
the solver's own definition: plain residual for least squares, residual
plus theta*||xi||_2^2 for ridge, residual plus kappa*||xi||_1 for the
LASSO, and residual plus lambda*||xi||_2^2 for sequentially thresholded
least squares (whose threshold plays the role of the multiplier in the
reported objective).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BaselineResult:
    xi: np.ndarray
    residual2: float
    reg_term: float
    objective: float
    support: np.ndarray
    inner_iterations: int
    converged: bool = True
    degenerate: bool = False

    @classmethod
    def from_xi(cls, H, y, xi, multiplier, reg, iterations, converged=True, degenerate=False):
        r = y - H @ xi
        res2 = float(r @ r)
        return cls(
            xi=xi,
            residual2=res2,
            reg_term=float(reg),
            objective=res2 + multiplier * float(reg),
            support=np.flatnonzero(xi),
            inner_iterations=iterations,
            converged=converged,
            degenerate=degenerate,
        )


def _check_inputs(H, y):
    H = np.atleast_2d(np.asarray(H, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if H.shape[0] != y.size:
        raise ValueError("H and y disagree on the number of samples")
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite entries in H or y")
    return H, y


def least_squares(H, y) -> BaselineResult:
    """Minimum-norm least-squares solution of ||y - H xi||_2^2."""
    H, y = _check_inputs(H, y)
    xi = np.linalg.lstsq(H, y, rcond=None)[0]
    return BaselineResult.from_xi(H, y, xi, 0.0, 0.0, iterations=1)


def ridge(H, y, theta: float) -> BaselineResult:
    """Tikhonov-regularized solution (H^T H + theta I)^-1 H^T y."""
    H, y = _check_inputs(H, y)
    if theta < 0:
        raise ValueError("ridge parameter must be nonnegative")
    c = H.shape[1]
    gram = H.T @ H + theta * np.eye(c)
    try:
        xi = np.linalg.solve(gram, H.T @ y)
    except np.linalg.LinAlgError:
        # singular normal equations (theta = 0 on rank-deficient H)
        xi = np.linalg.lstsq(H, y, rcond=None)[0]
    return BaselineResult.from_xi(H, y, xi, theta, float(xi @ xi), iterations=1)


def lasso(
    H, y, kappa: float, tol: float = 1e-10, max_iter: int = 100_000, xi0=None
) -> BaselineResult:
    """Cyclic coordinate descent for ||y - H xi||_2^2 + kappa ||xi||_1.

    Convergence is declared on the subgradient optimality residual: the
    gradient must equal -kappa*sign(xi_l) on the support and stay within
    kappa off it, up to ``tol``.  Running out of iterations flags the
    result as non-converged instead of raising.  ``xi0`` warm-starts the
    iteration (useful along a descending regularization path).
    """
    H, y = _check_inputs(H, y)
    if kappa < 0:
        raise ValueError("lasso parameter must be nonnegative")
    if kappa == 0.0:
        ls = least_squares(H, y)
        return BaselineResult.from_xi(H, y, ls.xi, 0.0, float(np.abs(ls.xi).sum()), 1)
    c = H.shape[1]
    col_norm2 = np.einsum("ij,ij->j", H, H)
    xi = np.zeros(c) if xi0 is None else np.asarray(xi0, dtype=float).copy()
    r = y - H @ xi if xi0 is not None else y.copy()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        for l in range(c):
            if col_norm2[l] == 0.0:
                continue
            h = H[:, l]
            old = xi[l]
            rho = h @ r + col_norm2[l] * old
            new = np.sign(rho) * max(abs(rho) - kappa / 2.0, 0.0) / col_norm2[l]
            if new != old:
                r += h * (old - new)
                xi[l] = new
        grad = -2.0 * (H.T @ r)
        on = xi != 0.0
        kkt = 0.0
        if np.any(on):
            kkt = np.max(np.abs(grad[on] + kappa * np.sign(xi[on])))
        if np.any(~on):
            kkt = max(kkt, max(0.0, np.max(np.abs(grad[~on])) - kappa))
        if kkt <= tol:
            converged = True
            break
    return BaselineResult.from_xi(
        H, y, xi, kappa, float(np.abs(xi).sum()), it, converged=converged
    )


def stlsq(H, y, lam: float, max_iter: int = 25) -> BaselineResult:
    """Sequentially thresholded least squares.

    Alternates a least-squares refit on the active set with zeroing of all
    coefficients below ``lam`` in magnitude, until the active set is stable
    or the iteration budget runs out.  An emptied active set returns the
    zero solution flagged degenerate.
    """
    H, y = _check_inputs(H, y)
    if lam < 0:
        raise ValueError("threshold must be nonnegative")
    c = H.shape[1]
    xi = np.linalg.lstsq(H, y, rcond=None)[0]
    active = np.ones(c, dtype=bool)
    it = 1
    for it in range(1, max_iter + 1):
        keep = np.abs(xi) >= lam if lam > 0 else np.ones(c, dtype=bool)
        keep &= active
        if not np.any(keep):
            zero = np.zeros(c)
            return BaselineResult.from_xi(H, y, zero, lam, 0.0, it, degenerate=True)
        if np.array_equal(keep, active) and it > 1:
            break
        active = keep
        xi = np.zeros(c)
        xi[active] = np.linalg.lstsq(H[:, active], y, rcond=None)[0]
    return BaselineResult.from_xi(H, y, xi, lam, float(xi @ xi), it)
