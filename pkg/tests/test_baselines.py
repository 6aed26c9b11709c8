import itertools

import numpy as np
import pytest

from dynident.baselines import lasso, least_squares, ridge, stlsq


# ------------------------------------------------------------- least squares

def test_ls_identity():
    y = np.array([3.0, -1.0, 2.0])
    res = least_squares(np.eye(3), y)
    assert np.allclose(res.xi, y, rtol=0, atol=1e-14)
    assert res.objective == res.residual2


def test_ls_column_of_ones_mean():
    res = least_squares(np.array([[1.0], [1.0]]), np.array([1.0, 3.0]))
    assert res.xi[0] == pytest.approx(2.0, abs=1e-14)


def test_ls_normal_equations_oracle():
    rng = np.random.RandomState(0)
    H = rng.randn(20, 5)
    y = rng.randn(20)
    res = least_squares(H, y)
    assert np.max(np.abs(H.T @ (y - H @ res.xi))) <= 1e-10


def test_ls_minimum_norm_when_rank_deficient():
    rng = np.random.RandomState(1)
    base = rng.randn(10, 2)
    H = np.column_stack([base, base[:, 0] + base[:, 1]])
    y = rng.randn(10)
    res = least_squares(H, y)
    # any solution xi + t*(1,1,-1) has the same residual; minimum norm is
    # orthogonal to the null space
    null = np.array([1.0, 1.0, -1.0])
    assert abs(res.xi @ null) <= 1e-10


def test_ls_rejects_nonfinite():
    with pytest.raises(ValueError):
        least_squares(np.array([[np.nan]]), np.array([1.0]))


# -------------------------------------------------------------------- ridge

def test_ridge_zero_matches_ls():
    rng = np.random.RandomState(2)
    H = rng.randn(12, 4)
    y = rng.randn(12)
    assert np.allclose(ridge(H, y, 0.0).xi, least_squares(H, y).xi, rtol=0, atol=1e-12)


def test_ridge_identity_example():
    res = ridge(np.eye(2), np.array([2.0, 4.0]), 1.0)
    assert np.allclose(res.xi, [1.0, 2.0], rtol=0, atol=1e-14)


def test_ridge_two_by_two_oracle():
    # frozen from an independent solve of (H^T H + theta I) xi = H^T y:
    # H = [[1,1],[0,1]], y = (1,1), theta = 0.5 -> xi = (2/11, 8/11)
    res = ridge(np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([1.0, 1.0]), 0.5)
    assert np.allclose(res.xi, [2.0 / 11.0, 8.0 / 11.0], rtol=0, atol=1e-12)
    assert res.xi == pytest.approx([0.18182, 0.72727], abs=5e-6)


def test_ridge_negative_theta_rejected():
    with pytest.raises(ValueError):
        ridge(np.eye(2), np.zeros(2), -0.1)


def test_ridge_shrinkage_monotonicity():
    rng = np.random.RandomState(3)
    for _ in range(20):
        H = rng.randn(15, 4)
        y = rng.randn(15)
        thetas = np.sort(rng.uniform(0.0, 10.0, size=5))
        norms = [np.linalg.norm(ridge(H, y, t).xi) for t in thetas]
        assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))


# -------------------------------------------------------------------- lasso

def test_lasso_zero_kappa_matches_ls():
    rng = np.random.RandomState(4)
    H = rng.randn(10, 3)
    y = rng.randn(10)
    assert np.allclose(lasso(H, y, 0.0).xi, least_squares(H, y).xi, rtol=0, atol=1e-10)


def test_lasso_soft_threshold_example():
    res = lasso(np.eye(2), np.array([3.0, 0.05]), kappa=0.2)
    assert np.allclose(res.xi, [2.9, 0.0], rtol=0, atol=1e-12)
    assert res.converged
    _assert_lasso_kkt(np.eye(2), np.array([3.0, 0.05]), 0.2, res.xi, tol=1e-10)


def test_lasso_full_shrinkage():
    rng = np.random.RandomState(5)
    H = rng.randn(8, 3)
    y = rng.randn(8)
    kappa = 2.0 * np.max(np.abs(H.T @ y)) + 1.0
    res = lasso(H, y, kappa)
    assert np.array_equal(res.xi, np.zeros(3))


def _assert_lasso_kkt(H, y, kappa, xi, tol):
    grad = -2.0 * H.T @ (y - H @ xi)
    for l in range(xi.size):
        if xi[l] != 0:
            assert abs(grad[l] + kappa * np.sign(xi[l])) <= tol
        else:
            assert abs(grad[l]) <= kappa + tol


def test_lasso_kkt_property():
    rng = np.random.RandomState(6)
    for _ in range(20):
        H = rng.randn(25, 6)
        y = rng.randn(25)
        kappa = rng.uniform(0.1, 5.0)
        res = lasso(H, y, kappa, tol=1e-10)
        assert res.converged
        _assert_lasso_kkt(H, y, kappa, res.xi, tol=1e-8)


def test_lasso_nonconvergence_flagged_not_raised():
    rng = np.random.RandomState(7)
    H = rng.randn(30, 8)
    y = rng.randn(30)
    res = lasso(H, y, 0.01, tol=1e-16, max_iter=1)
    assert not res.converged


def test_lasso_objective_definition():
    rng = np.random.RandomState(8)
    H = rng.randn(10, 3)
    y = rng.randn(10)
    res = lasso(H, y, 0.7)
    r = y - H @ res.xi
    assert res.objective == pytest.approx(r @ r + 0.7 * np.abs(res.xi).sum(), rel=1e-12)


# -------------------------------------------------------------------- stlsq

def test_stlsq_zero_threshold_matches_ls():
    rng = np.random.RandomState(9)
    H = rng.randn(12, 4)
    y = rng.randn(12)
    assert np.allclose(stlsq(H, y, 0.0).xi, least_squares(H, y).xi, rtol=0, atol=1e-12)


def test_stlsq_identity_example_with_exhaustive_oracle():
    H = np.eye(2)
    y = np.array([3.0, 0.05])
    res = stlsq(H, y, 0.1)
    assert np.array_equal(res.xi, [3.0, 0.0])
    # exhaustive search over supports: best residual among supports whose
    # refit coefficients all clear the threshold
    best = None
    for k in range(1, 3):
        for sup in itertools.combinations(range(2), k):
            xi = np.zeros(2)
            xi[list(sup)] = np.linalg.lstsq(H[:, list(sup)], y, rcond=None)[0]
            if np.all(np.abs(xi[list(sup)]) >= 0.1):
                r = y - H @ xi
                if best is None or r @ r < best[0]:
                    best = (r @ r, xi)
    assert np.array_equal(res.xi, best[1])


def test_stlsq_empty_active_set_degenerate():
    res = stlsq(np.eye(2), np.array([0.1, 0.2]), lam=10.0)
    assert res.degenerate
    assert np.array_equal(res.xi, np.zeros(2))


def test_stlsq_fixed_point_property():
    rng = np.random.RandomState(10)
    for _ in range(10):
        H = rng.randn(30, 6)
        xi_true = np.zeros(6)
        xi_true[:3] = rng.uniform(1.0, 3.0, 3)
        y = H @ xi_true + 0.01 * rng.randn(30)
        res = stlsq(H, y, 0.5)
        if res.degenerate:
            continue
        sup = res.support
        again = stlsq(H[:, sup], y, 0.5)
        assert np.allclose(again.xi, res.xi[sup], rtol=0, atol=1e-10)


def test_stlsq_negative_threshold_rejected():
    with pytest.raises(ValueError):
        stlsq(np.eye(2), np.zeros(2), -1.0)
