"""Benchmark chaotic ODE systems and synthetic data generation.

Three three-dimensional systems are supported: the Lorenz convection model,
the Vance one-predator/two-prey model (with its Hadamard-product form), and
the Shil'nikov cubic variant of the Lorenz system.  Trajectories are
integrated on a uniform grid, corrupted with seeded additive noise, and
derivative data are then re-evaluated from the noisy states through the
system right-hand side.  Because every right-hand side is polynomial, the
noisy derivative matrix is consistent with the polynomial library of the
noisy states to machine precision, which is what makes near-exact sparse
recovery possible downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .features import LibrarySpec, exponent_tuples
from .rng import Xoshiro256pp

SYSTEMS = ("lorenz", "vance", "shilnikov")

#: Initial conditions used when the caller does not supply any.  These are
#: configuration, not physics: they land on (or fall quickly onto) each
#: system's chaotic attractor and are recorded in the run manifest.
DEFAULT_X0 = {
    "lorenz": (-8.0, 7.0, 27.0),
    "vance": (100.0, 100.0, 100.0),
    "shilnikov": (0.1, 0.1, 0.1),
}


class IntegrationError(RuntimeError):
    """Raised when the ODE integrator cannot continue (step-size underflow
    or a non-finite state); the message names the time of failure."""


@dataclass(frozen=True)
class SystemParams:
    """A benchmark system plus its parameter vector.

    ``values`` is flat: (sigma, rho, beta) for Lorenz, (alpha, lambda, B)
    for Shil'nikov, and the 3 growth rates followed by the row-major 3x3
    interaction matrix for Vance.
    """

    system: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        expected = 12 if self.system == "vance" else 3
        if len(self.values) != expected:
            raise ValueError(
                f"{self.system} takes {expected} parameters, got {len(self.values)}"
            )
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def dim(self) -> int:
        return 3

    @classmethod
    def lorenz(cls, sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0):
        return cls("lorenz", (sigma, rho, beta))

    @classmethod
    def vance(cls, r=None, alpha=None):
        if r is None:
            r = (1.0, 1.0, -1.0)
        if alpha is None:
            alpha = np.array([[1.0, 1.0, 10.0], [1.5, 1.0, 1.0], [-5.0, -0.5, 0.0]]) / 1000.0
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (3, 3) or len(r) != 3:
            raise ValueError("vance expects a 3-vector r and a 3x3 matrix alpha")
        return cls("vance", tuple(r) + tuple(alpha.ravel()))

    @classmethod
    def shilnikov(
        cls,
        alpha: float = 4.0 * np.sqrt(30.0) / 135.0,
        lam: float = 11.0 * np.sqrt(30.0) / 90.0,
        B: float = 2.0 / 13.0,
    ):
        return cls("shilnikov", (alpha, lam, B))

    @classmethod
    def default(cls, system: str) -> "SystemParams":
        if system == "lorenz":
            return cls.lorenz()
        if system == "vance":
            return cls.vance()
        if system == "shilnikov":
            return cls.shilnikov()
        raise ValueError(f"unknown system {system!r}")


@dataclass
class TimeSeries:
    """A trajectory sampled on a uniform time grid.

    ``X`` is m x n (rows are time samples); ``Xdot`` shares its shape and
    stays None until derivative data have been computed.
    """

    t: np.ndarray
    X: np.ndarray
    Xdot: np.ndarray | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if self.t.ndim != 1 or self.t.size != self.X.shape[0]:
            raise ValueError("t must be a vector with one entry per row of X")
        if self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise ValueError("X must be at least 1x1")
        if self.t.size > 1:
            steps = np.diff(self.t)
            dt = steps[0]
            if dt <= 0 or np.any(np.abs(steps - dt) > 1e-12 * dt):
                raise ValueError("time grid must be strictly increasing and uniform")
        if self.Xdot is not None:
            self.Xdot = np.asarray(self.Xdot, dtype=float)
            if self.Xdot.shape != self.X.shape:
                raise ValueError("Xdot must share the shape of X")

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def t_step(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise description: family, scale multiplier and seed.

    Unit samples have variance one for both families (the Laplace scale is
    fixed at 1/sqrt(2)), so ``eps`` is directly comparable across families.
    """

    family: str = "gaussian"
    eps: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in ("gaussian", "laplace"):
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.eps < 0:
            raise ValueError("noise scale must be nonnegative")


def rhs(params: SystemParams, x) -> np.ndarray:
    """Evaluate the system right-hand side f(x) at a single state."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.dim,):
        raise ValueError(f"state must have shape ({params.dim},), got {x.shape}")
    return _rhs_rows(params, x[None, :])[0]


def _rhs_rows(params: SystemParams, X: np.ndarray) -> np.ndarray:
    """Vectorized right-hand side over rows of X."""
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    if params.system == "lorenz":
        sigma, rho, beta = params.values
        return np.column_stack(
            [sigma * (x2 - x1), x1 * (rho - x3) - x2, x1 * x2 - beta * x3]
        )
    if params.system == "vance":
        r = np.asarray(params.values[:3])
        alpha = np.asarray(params.values[3:]).reshape(3, 3)
        return (r[None, :] - X @ alpha.T) * X
    if params.system == "shilnikov":
        alpha, lam, B = params.values
        return np.column_stack(
            [x2, x1 * (1.0 - x3) - B * x1 ** 3 - lam * x2, -alpha * (x3 - x1 ** 2)]
        )
    raise ValueError(f"unknown system {params.system!r}")


def integrate(
    params: SystemParams,
    x0,
    T: float,
    t_step: float,
    rtol: float = 1e-9,
    atol: float = 1e-9,
) -> TimeSeries:
    """Integrate the system on the uniform grid 0, dt, ..., round(T/dt)*dt.

    Uses the adaptive Dormand-Prince RK45 pair with dense output evaluated
    at the grid times.  Returns round(T/t_step)+1 samples; Xdot is left
    unset.
    """
    if T <= 0 or t_step <= 0 or T / t_step < 1:
        raise ValueError("need T > 0, t_step > 0 and T/t_step >= 1")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (params.dim,):
        raise ValueError(f"x0 must have shape ({params.dim},)")
    m = int(round(T / t_step)) + 1
    t = np.arange(m) * t_step

    def fun(_t, y):
        return _rhs_rows(params, y[None, :])[0]

    sol = solve_ivp(
        fun, (t[0], t[-1]), x0, method="RK45", t_eval=t, rtol=rtol, atol=atol
    )
    if not sol.success or sol.y.shape[1] != m or not np.all(np.isfinite(sol.y)):
        t_fail = sol.t[-1] if sol.t.size else t[0]
        raise IntegrationError(f"integration of {params.system} failed at t={t_fail}")
    return TimeSeries(t=t, X=sol.y.T)


def add_noise(X: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Return X + eps * S with unit-variance entries of S drawn row-major
    from the seeded generator; a given seed always yields identical output."""
    X = np.asarray(X, dtype=float)
    if spec.eps == 0.0:
        return X.copy()
    gen = Xoshiro256pp(spec.seed)
    if spec.family == "gaussian":
        s = gen.standard_normal(X.size)
    else:
        s = gen.standard_laplace(X.size, b=1.0 / np.sqrt(2.0))
    return X + spec.eps * s.reshape(X.shape)


def derivatives_from_noisy(params: SystemParams, X_noisy: np.ndarray) -> np.ndarray:
    """Derivative matrix whose row i is rhs(params, X_noisy[i])."""
    X_noisy = np.atleast_2d(np.asarray(X_noisy, dtype=float))
    if X_noisy.shape[1] != params.dim:
        raise ValueError(
            f"state matrix must have {params.dim} columns, got {X_noisy.shape[1]}"
        )
    bad = ~np.all(np.isfinite(X_noisy), axis=1)
    if np.any(bad):
        raise ValueError(f"non-finite state in row {int(np.flatnonzero(bad)[0])}")
    return _rhs_rows(params, X_noisy)


def true_coefficients(params: SystemParams, spec: LibrarySpec) -> np.ndarray:
    """The exact coefficient matrix of the system in the given library.

    Every benchmark right-hand side is polynomial, so for a sufficiently
    rich alphabet there is a coefficient matrix Xi with f(x) = h(x) Xi
    exactly.  Raises if the alphabet cannot represent the system.
    """
    n = params.dim
    exps = exponent_tuples(spec, n)
    index = {e: i for i, e in enumerate(exps)}
    cols = _monomial_expansion(params)
    xi = np.zeros((len(exps), n))
    for j, terms in enumerate(cols):
        for exp, coef in terms.items():
            if exp not in index:
                raise ValueError(
                    f"library (degree {spec.degree}) cannot represent {params.system}"
                )
            xi[index[exp], j] += coef
    return xi


def _monomial_expansion(params: SystemParams):
    """Per-dimension {exponent tuple: coefficient} maps of the system."""

    def e(*idx):
        v = [0, 0, 0]
        for i in idx:
            v[i] += 1
        return tuple(v)

    if params.system == "lorenz":
        sigma, rho, beta = params.values
        return [
            {e(0): -sigma, e(1): sigma},
            {e(0): rho, e(1): -1.0, e(0, 2): -1.0},
            {e(0, 1): 1.0, e(2): -beta},
        ]
    if params.system == "vance":
        r = params.values[:3]
        alpha = np.asarray(params.values[3:]).reshape(3, 3)
        cols = []
        for j in range(3):
            terms = {e(j): r[j]}
            for k in range(3):
                exp = e(j, k)
                terms[exp] = terms.get(exp, 0.0) - alpha[j, k]
            cols.append(terms)
        return cols
    if params.system == "shilnikov":
        alpha, lam, B = params.values
        return [
            {e(1): 1.0},
            {e(0): 1.0, e(0, 2): -1.0, e(0, 0, 0): -B, e(1): -lam},
            {e(2): -alpha, e(0, 0): alpha},
        ]
    raise ValueError(f"unknown system {params.system!r}")
