"""Candidate-function library construction.

An alphabet of monomials is evaluated on every state sample to produce the
m x c library matrix used by all solvers.  Term order is total: constant
first when present, then degree 1 up to the requested degree, and within a
degree the product tuples from ``itertools.combinations_with_replacement``
(x1*x1 before x1*x2 before x2*x2).  This ordering is prefix-stable: the
degree-d library is the leading block of the degree-(d+1) library with the
same constant flag, which keeps cross-degree comparisons aligned.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np

_MAX_DEGREE = 3


@dataclass(frozen=True)
class LibrarySpec:
    """Alphabet description: optional constant column plus all monomials of
    total degree 1..degree.  ``extra_terms`` is reserved for unary
    extensions (trig alphabets) and must stay empty for now."""

    include_constant: bool = False
    degree: int = 2
    extra_terms: tuple = ()

    def __post_init__(self):
        if not 1 <= self.degree <= _MAX_DEGREE:
            raise ValueError(f"polynomial degree must be in 1..{_MAX_DEGREE}")
        if self.extra_terms:
            raise ValueError("extra terms are reserved and not implemented")


@dataclass
class LibraryMatrix:
    """Evaluated library: H is m x c, labels name each column."""

    H: np.ndarray
    labels: list[str]
    spec: LibrarySpec

    def __post_init__(self):
        if self.H.shape[1] != len(self.labels):
            raise ValueError("one label per column required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")


#: Named alphabets accepted by the pipeline and CLI; the trailing "c" marks
#: inclusion of the constant column.
ALPHABETS = {
    "poly1": LibrarySpec(False, 1),
    "poly2": LibrarySpec(False, 2),
    "poly2c": LibrarySpec(True, 2),
    "poly3": LibrarySpec(False, 3),
    "poly3c": LibrarySpec(True, 3),
}


def exponent_tuples(spec: LibrarySpec, n: int) -> list[tuple[int, ...]]:
    """Exponent tuples of all terms, in library column order."""
    if n < 1:
        raise ValueError("need at least one variable")
    out: list[tuple[int, ...]] = []
    if spec.include_constant:
        out.append((0,) * n)
    for deg in range(1, spec.degree + 1):
        for combo in combinations_with_replacement(range(n), deg):
            exp = [0] * n
            for k in combo:
                exp[k] += 1
            out.append(tuple(exp))
    return out


def term_count(spec: LibrarySpec, n: int) -> int:
    """Number of library columns for an n-dimensional state."""
    if n < 1:
        raise ValueError("need at least one variable")
    total = comb(n + spec.degree, spec.degree)  # includes the constant
    return total if spec.include_constant else total - 1


def term_label(exp: tuple[int, ...]) -> str:
    """Human-readable monomial name, e.g. "x1*x3" or "x2^2*x3"."""
    parts = []
    for k, p in enumerate(exp):
        if p == 1:
            parts.append(f"x{k + 1}")
        elif p > 1:
            parts.append(f"x{k + 1}^{p}")
    return "*".join(parts) if parts else "1"


def build_library(X: np.ndarray, spec: LibrarySpec) -> LibraryMatrix:
    """Evaluate every library term on every row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    bad = np.argwhere(~np.isfinite(X))
    if bad.size:
        i, j = bad[0]
        raise ValueError(f"non-finite entry in X at row {int(i)}, column {int(j)}")
    m, n = X.shape
    exps = exponent_tuples(spec, n)
    H = np.empty((m, len(exps)))
    for col, exp in enumerate(exps):
        v = np.ones(m)
        for k, p in enumerate(exp):
            if p:
                v = v * X[:, k] ** p
        H[:, col] = v
    return LibraryMatrix(H=H, labels=[term_label(e) for e in exps], spec=spec)
