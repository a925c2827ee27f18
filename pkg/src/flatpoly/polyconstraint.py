"""Sampling-based sufficient conditions for polynomial nonpositivity.

A degree-N constraint polynomial P is required to satisfy P(0) <= 0 and the
tightened sample conditions P(pT/N) - Delta(N) P(0) <= 0 at the uniform
sample points p = 1..N.  The constant Delta(N) is the supremum over [0, 1]
of eps(s) = -1 + sum_j w_j s^j with w = Q^{-1} (1..1)' and Q the sample
matrix ((i/N)^j); it depends on the degree only and is precomputed once.

Conditioning a pointwise constraint G_x x(t) + G_u u(t) + g0 <= 0 therefore
produces N_c (N+1) affine inequality rows in the free parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.optimize

from .errors import DegreeOutOfRange, DimensionMismatch
from .flat import LinearConstraintSpec
from .polybasis import AffinePoly, AffinePolyVector

__all__ = [
    "AffineConstraintSet",
    "DeltaTable",
    "sample_matrix",
    "compute_delta",
    "delta_table",
    "condition_constraints",
    "verify_nonpositivity",
]

#: Largest degree for which Delta is defined here (same cap as the basis).
MAX_DEGREE = 15

#: Grid resolution for the supremum search.
GRID_POINTS = 10_000


def sample_matrix(N):
    """Uniform-sample power matrix Q with Q[i-1, j-1] = (i/N)^j, i,j = 1..N.

    Q maps the nonconstant coefficients of a degree-N polynomial (in the
    unit-interval variable) to its values at the sample points i/N, up to
    the constant term.  It is invertible for every N >= 1.
    """
    if N < 1:
        raise DegreeOutOfRange(f"need N >= 1, got {N}")
    i = np.arange(1, N + 1)[:, None] / N
    j = np.arange(1, N + 1)[None, :]
    return i**j


def _solve_exact_ones(N):
    """w = Q^{-1} (1..1)' in exact rational arithmetic.

    The sample matrix is a scaled Vandermonde system whose float solution
    loses several digits already around N = 12; Gaussian elimination over
    Fraction keeps the downstream supremum exact to evaluation precision.
    """
    M = [
        [Fraction(i, N) ** j for j in range(1, N + 1)] + [Fraction(1)]
        for i in range(1, N + 1)
    ]
    for col in range(N):
        piv = max(range(col, N), key=lambda r: abs(M[r][col]))
        if M[piv][col] == 0:  # pragma: no cover - Q is invertible
            raise DegreeOutOfRange(f"sample matrix singular at N={N}")
        M[col], M[piv] = M[piv], M[col]
        for r in range(N):
            if r != col and M[r][col] != 0:
                fac = M[r][col] / M[col][col]
                M[r] = [a - fac * b for a, b in zip(M[r], M[col])]
    return [float(M[r][N] / M[r][r]) for r in range(N)]


def _eps_poly(N):
    """Coefficients of eps(s) = -1 + sum_{j=1..N} w_j s^j, low order first."""
    return np.array([-1.0] + _solve_exact_ones(N))


def _poly_supremum(coef):
    """Supremum of a polynomial on [0, 1]: dense grid + root polish.

    The grid brackets every sign change of the derivative; each bracket is
    polished with Brent's method, which pins interior extrema to ~1e-12.
    """
    p = np.polynomial.Polynomial(coef)
    dp = p.deriv()
    s = np.linspace(0.0, 1.0, GRID_POINTS)
    best = float(np.max(p(s)))
    ds = dp(s)
    sign_change = np.flatnonzero(np.sign(ds[:-1]) * np.sign(ds[1:]) < 0)
    for idx in sign_change:
        root = scipy.optimize.brentq(dp, s[idx], s[idx + 1], xtol=1e-14)
        best = max(best, float(p(root)))
    return best


@lru_cache(maxsize=None)
def compute_delta(N):
    """Nonpositivity margin Delta(N) = sup over [0,1] of eps(s).

    eps(s) = -1 + s-powers' Q^{-1} (1..1)' is the worst-case overshoot of a
    degree-N polynomial that is -1 at zero and 0 at all uniform samples;
    any polynomial meeting the tightened sample conditions stays below
    -Delta * P(0) between samples in the regime the bound covers.

    Parameters
    ----------
    N : int
        Polynomial degree, 1 <= N <= 15.

    Returns
    -------
    float
        Delta(N) >= 0; Delta(1) = 0 and Delta decreases with N.
    """
    if not 1 <= N <= MAX_DEGREE:
        raise DegreeOutOfRange(f"degree must be in 1..{MAX_DEGREE}, got {N}")
    return max(0.0, _poly_supremum(_eps_poly(N)))


@dataclass(frozen=True)
class DeltaTable:
    """Cached map N -> Delta(N) for N = 1..max_degree."""

    values: tuple

    def __getitem__(self, N):
        if not 1 <= N <= len(self.values):
            raise DegreeOutOfRange(
                f"degree must be in 1..{len(self.values)}, got {N}"
            )
        return self.values[N - 1]

    def __len__(self):
        return len(self.values)

    def items(self):
        return [(N, self.values[N - 1]) for N in range(1, len(self.values) + 1)]


@lru_cache(maxsize=None)
def delta_table(max_degree=MAX_DEGREE):
    """Precompute Delta(N) for N = 1..max_degree (defaults to the cap)."""
    if not 1 <= max_degree <= MAX_DEGREE:
        raise DegreeOutOfRange(
            f"max_degree must be in 1..{MAX_DEGREE}, got {max_degree}"
        )
    return DeltaTable(values=tuple(compute_delta(N) for N in range(1, max_degree + 1)))


@dataclass(frozen=True)
class AffineConstraintSet:
    """Affine rows G alpha <= h with per-row provenance.

    tags[r] = (k, p): row r came from constraint k sampled at t = p T / N,
    with p = 0 denoting the untightened t = 0 condition.
    """

    G: np.ndarray
    h: np.ndarray
    tags: tuple

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if G.shape[0] != h.size or len(self.tags) != h.size:
            raise DimensionMismatch(
                f"rows disagree: G {G.shape[0]}, h {h.size}, tags {len(self.tags)}"
            )
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(h))):
            raise DimensionMismatch("constraint rows contain non-finite entries")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "tags", tuple(self.tags))

    @property
    def n_rows(self):
        return self.h.size


def constraint_polynomials(x_poly: AffinePolyVector, u_poly: AffinePolyVector,
                           spec: LinearConstraintSpec) -> AffinePolyVector:
    """Stack the N_c constraint rows as polynomials in scaled time.

    Row k is P_k(t) = G_x[k] x(t) + G_u[k] u(t) + g0[k], affine in alpha.
    """
    n, m = x_poly.q, u_poly.q
    if spec.G_x.shape[1] != n or spec.G_u.shape[1] != m:
        raise DimensionMismatch(
            f"constraint columns ({spec.G_x.shape[1]}, {spec.G_u.shape[1]}) "
            f"vs trajectory dimensions ({n}, {m})"
        )
    if x_poly.T != u_poly.T or x_poly.n_free != u_poly.n_free:
        raise DimensionMismatch("state/input polynomials are inconsistent")
    c0 = spec.G_x @ x_poly.coef0 + spec.G_u @ u_poly.coef0
    c0[:, 0] += spec.g0
    cl = np.einsum("ka,aip->kip", spec.G_x, x_poly.coef_lin) + np.einsum(
        "kb,bip->kip", spec.G_u, u_poly.coef_lin
    )
    return AffinePolyVector(c0, cl, x_poly.T, role="constraint")


def condition_constraints(x_poly: AffinePolyVector, u_poly: AffinePolyVector,
                          spec: LinearConstraintSpec, T, delta
                          ) -> AffineConstraintSet:
    """Emit the sufficient affine rows for all pointwise constraints.

    For every constraint row k with polynomial P_k, the emitted conditions
    are P_k(0) <= 0 and P_k(p T / N) - delta P_k(0) <= 0 for p = 1..N,
    i.e. N_c (N+1) rows total, each affine in alpha (row: grad' alpha <= h).

    Parameters
    ----------
    delta : float
        The Delta(N) constant matching the polynomial degree.
    """
    if not np.isclose(T, x_poly.T):
        raise DimensionMismatch(f"horizon {T} vs polynomial horizon {x_poly.T}")
    P = constraint_polynomials(x_poly, u_poly, spec)
    N = P.degree
    n_c = P.q
    t_samples = np.arange(N + 1) * (T / N)
    b0, b_lin = P.affine_eval(t_samples)  # (n_c, N+1), (n_c, N+1, n_free)

    rows_G, rows_h, tags = [], [], []
    for k in range(n_c):
        rows_G.append(b_lin[k, 0])
        rows_h.append(-b0[k, 0])
        tags.append((k, 0))
        for p in range(1, N + 1):
            rows_G.append(b_lin[k, p] - delta * b_lin[k, 0])
            rows_h.append(-(b0[k, p] - delta * b0[k, 0]))
            tags.append((k, p))
    return AffineConstraintSet(
        G=np.array(rows_G), h=np.array(rows_h), tags=tuple(tags)
    )


def verify_nonpositivity(P: AffinePoly, alpha, T, grid_size=100_000):
    """Max of the instantiated polynomial over a dense uniform grid on [0, T].

    A test oracle: conditioned constraints promise this stays at or below
    zero (up to the numerical margin of the sample conditions).  Use at
    least ~10^3 points for the grid to resolve the between-sample bulges.
    """
    t = np.linspace(0.0, T, int(grid_size))
    return float(np.max(P(np.asarray(alpha, dtype=float), t)))
