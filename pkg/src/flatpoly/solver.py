"""Solvers for the conditioned problem in least-distance form.

The quadratic path minimizes f'f subject to G f <= h with an active-set
method: the least-distance problem is reduced to a nonnegative least-squares
problem (one column per constraint row), solved by the classic active-set
iteration with smallest-index tie breaking.  The dual variables come out of
the same iteration, so KKT conditions hold by construction at the reported
solution.

The linear path splits f into nonnegative parts, minimizes the coordinate
sum with a dense two-phase primal simplex (steepest reduced cost, falling
back to Bland's rule after a degenerate stretch so cycling stays
impossible), and maps the vertex back.  Its quadratic cost exceeds the QP
cost by at most a factor tied to the parameter count, which
suboptimality_report checks.

Both solvers normalize each constraint row to unit gradient norm first and
apply one absolute feasibility tolerance to the scaled rows.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .errors import FlatpolyError
from .costcond import (
    LeastDistanceProblem,
    ParameterizedCost,
    quadratic_value,
    unconstrained_optimum,
)

__all__ = [
    "SolveResult",
    "SuboptimalityReport",
    "solve_unconstrained",
    "solve_qp",
    "solve_lp",
    "suboptimality_report",
    "FEASIBILITY_TOL",
]

#: Absolute feasibility tolerance on unit-gradient constraint rows.
FEASIBILITY_TOL = 1e-8

#: Rows with gradient norm at or below this are constants, not constraints.
ZERO_ROW_TOL = 1e-13


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one solve.

    alpha, f are None unless status is 'optimal'.  active_rows lists the
    constraint rows (original indexing) tight at the solution; duals holds
    the corresponding multipliers for the unit-norm scaled rows.
    """

    alpha: np.ndarray
    f: np.ndarray
    quadratic_cost: float
    iterations: int
    solver: str
    active_rows: tuple
    status: str
    duals: np.ndarray = None


SuboptimalityReport = namedtuple(
    "SuboptimalityReport", ["j_lp", "j0", "j_c", "bound", "holds"]
)


def solve_unconstrained(pc: ParameterizedCost) -> SolveResult:
    """Closed-form minimizer of the conditioned cost, ignoring constraints."""
    alpha0 = unconstrained_optimum(pc)
    return SolveResult(
        alpha=alpha0,
        f=np.zeros(pc.n_free),
        quadratic_cost=quadratic_value(pc, alpha0),
        iterations=0,
        solver="unconstrained",
        active_rows=(),
        status="optimal",
    )


def _scaled_rows(G, h):
    """Normalize rows to unit gradient norm; separate constant rows.

    Returns (Gn, hn, kept) where kept maps scaled rows back to original
    indices, or None in place of the triple when a constant row is violated
    (the instance is infeasible regardless of f).
    """
    norms = np.linalg.norm(G, axis=1)
    scale = max(1.0, np.abs(G).max()) if G.size else 1.0
    zero = norms <= ZERO_ROW_TOL * scale
    if np.any(h[zero] < -FEASIBILITY_TOL):
        return None
    kept = np.flatnonzero(~zero)
    Gn = G[kept] / norms[kept, None]
    hn = h[kept] / norms[kept]
    return Gn, hn, kept


def _infeasible(solver):
    return SolveResult(
        alpha=None, f=None, quadratic_cost=float("nan"), iterations=0,
        solver=solver, active_rows=(), status="infeasible",
    )


def _nnls_active_set(E, b, max_iter, seed=None):
    """min ||E u - b|| over u >= 0 by the active-set iteration.

    seed is an optional iterable of variable indices to start in the
    passive (nonzero) set; infeasible seed components are dropped before
    the main loop.  Ties always resolve to the smallest index, which is
    the anti-cycling rule for this method.

    Returns (u, iterations, converged).
    """
    n_vars = E.shape[1]
    passive = np.zeros(n_vars, dtype=bool)
    u = np.zeros(n_vars)
    iters = 0
    tol = 1e-11 * max(1.0, np.abs(E).max())

    def ls_on_passive():
        idx = np.flatnonzero(passive)
        z = np.zeros(n_vars)
        if idx.size:
            z[idx] = np.linalg.lstsq(E[:, idx], b, rcond=None)[0]
        return z

    if seed is not None:
        passive[np.asarray(list(seed), dtype=int)] = True
        while passive.any():
            z = ls_on_passive()
            bad = passive & (z <= tol)
            if not bad.any():
                u = np.where(passive, z, 0.0)
                break
            passive[np.argmax(bad)] = False
        else:
            u = np.zeros(n_vars)

    while True:
        w = E.T @ (b - E @ u)
        w[passive] = -np.inf
        if not (~passive).any() or np.max(w) <= tol:
            return u, iters, True
        # Most violated dual, smallest index on ties (argmax returns first).
        passive[int(np.argmax(w))] = True
        while True:
            iters += 1
            if iters > max_iter:
                return u, iters, False
            z = ls_on_passive()
            inner = passive & (z <= tol)
            if not inner.any():
                u = np.where(passive, z, 0.0)
                break
            idx = np.flatnonzero(inner)
            ratios = u[idx] / (u[idx] - z[idx])
            theta = np.min(ratios)
            u = u + theta * (z - u)
            drop = idx[int(np.argmin(ratios))]
            u[drop] = 0.0
            u[~passive] = 0.0
            np.maximum(u, 0.0, out=u)
            passive[drop] = False


def _polish_active(Gn, hn, support):
    """Re-solve the equality-constrained projection on the given active set.

    f = Gn_A' lam with Gn_A Gn_A' lam = hn_A is the exact minimum-norm point
    with those rows tight; the multipliers -2 lam must be nonnegative for it
    to be the constrained optimum.  Returns (f, duals) or None if the
    active-set guess does not check out (caller keeps the iterate).
    """
    A = np.flatnonzero(support)
    if A.size == 0:
        return np.zeros(Gn.shape[1]), np.zeros(0)
    GA = Gn[A]
    M = GA @ GA.T
    try:
        lam = np.linalg.solve(M, hn[A])
    except np.linalg.LinAlgError:
        return None
    f = GA.T @ lam
    mu = -2.0 * lam
    if np.any(mu < -1e-9):
        return None
    if Gn.shape[0] and np.max(Gn @ f - hn) > FEASIBILITY_TOL:
        return None
    return f, np.maximum(mu, 0.0)


def solve_qp(ldp: LeastDistanceProblem, max_iter=None, warm_start=None
             ) -> SolveResult:
    """Minimize f'f subject to the least-distance constraint rows.

    The dual of the least-distance problem is a nonnegative least-squares
    problem with one variable per row: stack E = [-G'; -h'], b = e_{n+1};
    with residual r = E u - b, the optimizer is f = -r[:n] / r[n] and the
    multipliers are u rescaled, so stationarity 2 f + G' mu = 0 is exact.
    A zero residual certifies that no feasible f exists.

    Parameters
    ----------
    max_iter : int, optional
        Defaults to 10 times the row count.
    warm_start : iterable of int, optional
        Row indices (original indexing) expected active, e.g. from the
        previous receding-horizon step.

    Returns
    -------
    SolveResult with solver='qp'.
    """
    n = ldp.n_free
    scaled = _scaled_rows(ldp.G, ldp.h)
    if scaled is None:
        return _infeasible("qp")
    Gn, hn, kept = scaled
    M = kept.size
    if M == 0:
        return SolveResult(
            alpha=ldp.alpha0, f=np.zeros(n), quadratic_cost=ldp.c,
            iterations=0, solver="qp", active_rows=(), status="optimal",
            duals=np.zeros(0),
        )
    if max_iter is None:
        max_iter = 10 * M

    E = np.vstack([-Gn.T, -hn[None, :]])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    seed = None
    if warm_start is not None:
        orig_to_scaled = {int(o): s for s, o in enumerate(kept)}
        seed = [orig_to_scaled[int(r)] for r in warm_start
                if int(r) in orig_to_scaled]
    u, iters, converged = _nnls_active_set(E, b, max_iter, seed=seed)
    if not converged:
        return SolveResult(
            alpha=None, f=None, quadratic_cost=float("nan"),
            iterations=iters, solver="qp", active_rows=(),
            status="iteration_limit",
        )
    r = E @ u - b
    rnorm = np.linalg.norm(r)
    if rnorm <= 1e-10:
        return SolveResult(
            alpha=None, f=None, quadratic_cost=float("nan"),
            iterations=iters, solver="qp", active_rows=(),
            status="infeasible",
        )
    f = -r[:n] / r[n]
    mu = -2.0 * u / r[n]
    support = u > 0
    polished = _polish_active(Gn, hn, support)
    if polished is not None:
        f, mu_active = polished
        mu = np.zeros(M)
        mu[np.flatnonzero(support)] = mu_active
    active = tuple(int(kept[i]) for i in np.flatnonzero(support))
    alpha = ldp.alpha_from_f(f)
    return SolveResult(
        alpha=alpha, f=f, quadratic_cost=float(f @ f + ldp.c),
        iterations=iters, solver="qp", active_rows=active,
        status="optimal", duals=mu,
    )


def _simplex(tableau, basis, cost_row, max_iter, iters):
    """Dense primal simplex on an equality tableau.

    Pivoting is Dantzig's rule (most negative reduced cost, smallest index
    on ties); after a run of degenerate pivots it falls back to Bland's
    rule until progress resumes, which rules out cycling while keeping the
    fast rule on the non-degenerate path.  Fully deterministic.

    tableau: (M, n_cols+1) with the rhs in the last column and a feasible
    basis; cost_row: length n_cols objective.  Mutates tableau/basis.
    Returns (iters, status) with status in 'optimal' | 'iteration_limit';
    raises FlatpolyError on unboundedness (malformed input, defensive).
    """
    Mrows, n_cols = tableau.shape[0], tableau.shape[1] - 1
    degenerate_streak = 0
    while True:
        # Reduced costs for the current basis.
        cb = cost_row[basis]
        red = cost_row - cb @ tableau[:, :n_cols]
        entering = -1
        if degenerate_streak < 8:
            j = int(np.argmin(red))
            if red[j] < -1e-9:
                entering = j
        else:
            for j in range(n_cols):  # Bland: smallest eligible index
                if red[j] < -1e-9:
                    entering = j
                    break
        if entering < 0:
            return iters, "optimal"
        iters += 1
        if iters > max_iter:
            return iters, "iteration_limit"
        col = tableau[:, entering]
        rhs = tableau[:, -1]
        best_ratio, leave = np.inf, -1
        for i in range(Mrows):
            if col[i] > 1e-11:
                ratio = rhs[i] / col[i]
                if ratio < best_ratio - 1e-12 or (
                    abs(ratio - best_ratio) <= 1e-12
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio, leave = ratio, i
        if leave < 0:
            raise FlatpolyError(
                "LP relaxation is unbounded; constraint rows are malformed"
            )
        degenerate_streak = degenerate_streak + 1 if best_ratio <= 1e-12 else 0
        piv = tableau[leave, entering]
        tableau[leave] /= piv
        for i in range(Mrows):
            if i != leave and tableau[i, entering] != 0.0:
                tableau[i] -= tableau[i, entering] * tableau[leave]
        basis[leave] = entering


def solve_lp(ldp: LeastDistanceProblem, max_iter=None) -> SolveResult:
    """Approximate the least-distance problem through a linear program.

    Each coordinate is split as f_i = fp_i - fn_i with both parts
    nonnegative and the coordinate sum of the parts is minimized, subject
    to the same rows.  At a simplex vertex at most one of fp_i, fn_i is
    basic, so the split is exact.  Solved by a two-phase dense primal
    simplex with Bland's rule (anti-cycling, deterministic).

    Returns
    -------
    SolveResult with solver='lp'.
    """
    n = ldp.n_free
    scaled = _scaled_rows(ldp.G, ldp.h)
    if scaled is None:
        return _infeasible("lp")
    Gn, hn, kept = scaled
    M = kept.size
    if M == 0:
        return SolveResult(
            alpha=ldp.alpha0, f=np.zeros(n), quadratic_cost=ldp.c,
            iterations=0, solver="lp", active_rows=(), status="optimal",
            duals=np.zeros(0),
        )
    if max_iter is None:
        max_iter = 10 * (M + 2 * n)

    # Standard form: [Gn, -Gn] v + s = hn, v >= 0, s >= 0.
    A = np.hstack([Gn, -Gn, np.eye(M)])
    rhs = hn.copy()
    n_struct = 2 * n + M
    neg = rhs < 0
    A[neg] *= -1.0
    rhs[neg] *= -1.0
    art_rows = np.flatnonzero(neg)
    n_art = art_rows.size
    n_cols = n_struct + n_art
    tableau = np.zeros((M, n_cols + 1))
    tableau[:, :n_struct] = A
    for a, i in enumerate(art_rows):
        tableau[i, n_struct + a] = 1.0
    tableau[:, -1] = rhs

    basis = np.empty(M, dtype=int)
    for i in range(M):
        basis[i] = 2 * n + i  # slack of row i
    for a, i in enumerate(art_rows):
        basis[i] = n_struct + a

    iters = 0
    if n_art:
        phase1 = np.zeros(n_cols)
        phase1[n_struct:] = 1.0
        iters, status = _simplex(tableau, basis, phase1, max_iter, iters)
        if status != "optimal":
            return SolveResult(
                alpha=None, f=None, quadratic_cost=float("nan"),
                iterations=iters, solver="lp", active_rows=(),
                status="iteration_limit",
            )
        resid = float(phase1[basis] @ tableau[:, -1])
        if resid > 1e-9 * max(1.0, np.abs(hn).max()):
            return SolveResult(
                alpha=None, f=None, quadratic_cost=float("nan"),
                iterations=iters, solver="lp", active_rows=(),
                status="infeasible",
            )
        # Pivot any artificial still basic (at zero) out of the basis.
        for i in range(M):
            if basis[i] >= n_struct:
                row = tableau[i, :n_struct]
                j = next((jj for jj in range(n_struct)
                          if abs(row[jj]) > 1e-9), None)
                if j is None:
                    tableau[i] = 0.0  # redundant row
                    continue
                piv = tableau[i, j]
                tableau[i] /= piv
                for i2 in range(M):
                    if i2 != i and tableau[i2, j] != 0.0:
                        tableau[i2] -= tableau[i2, j] * tableau[i]
                basis[i] = j
        tableau = np.hstack([tableau[:, :n_struct], tableau[:, -1:]])
        n_cols = n_struct

    phase2 = np.zeros(n_cols)
    phase2[: 2 * n] = 1.0
    iters, status = _simplex(tableau, basis, phase2, max_iter, iters)
    if status != "optimal":
        return SolveResult(
            alpha=None, f=None, quadratic_cost=float("nan"),
            iterations=iters, solver="lp", active_rows=(),
            status="iteration_limit",
        )

    v = np.zeros(n_cols)
    v[basis] = tableau[:, -1]
    f = v[:n] - v[n : 2 * n]
    slack_vals = Gn @ f - hn
    active = tuple(int(kept[i]) for i in np.flatnonzero(
        slack_vals >= -FEASIBILITY_TOL
    ))
    alpha = ldp.alpha_from_f(f)
    return SolveResult(
        alpha=alpha, f=f, quadratic_cost=float(f @ f + ldp.c),
        iterations=iters, solver="lp", active_rows=active,
        status="optimal",
    )


def suboptimality_report(qp: SolveResult, lp: SolveResult,
                         pc: ParameterizedCost, tol=1e-8
                         ) -> SuboptimalityReport:
    """Worst-case bound check relating the LP vertex to the QP optimum.

    With J0 the unconstrained minimum and J_C = J(QP) - J0 the constraint
    cost, the LP solution's quadratic cost is bounded by J0 + n_free * J_C:
    the LP coordinate sum bounds the Euclidean norm by at most a sqrt of
    the dimension, squared in the cost.

    Returns
    -------
    SuboptimalityReport(j_lp, j0, j_c, bound, holds)
    """
    if qp.status != "optimal" or lp.status != "optimal":
        raise FlatpolyError("suboptimality report needs two optimal results")
    alpha0 = unconstrained_optimum(pc)
    j0 = quadratic_value(pc, alpha0)
    j_c = qp.quadratic_cost - j0
    bound = j0 + pc.n_free * j_c
    return SuboptimalityReport(
        j_lp=lp.quadratic_cost,
        j0=j0,
        j_c=j_c,
        bound=bound,
        holds=bool(lp.quadratic_cost <= bound + tol),
    )
