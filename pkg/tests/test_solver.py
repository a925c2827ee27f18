from itertools import combinations

import numpy as np
import pytest

from flatpoly import (
    FEASIBILITY_TOL,
    FlatpolyError,
    LeastDistanceProblem,
    ParameterizedCost,
    solve_lp,
    solve_qp,
    solve_unconstrained,
    suboptimality_report,
)


def toy_ldp(G, h, n=None, c=0.0):
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float)
    if n is None:
        n = G.shape[1]
    return LeastDistanceProblem(
        F=np.eye(n),
        alpha0=np.zeros(n),
        c=c,
        G=G,
        h=h,
        tags=tuple((int(i), 0) for i in range(G.shape[0])),
    )


def random_feasible_ldp(rng, max_n=12, max_m=60):
    """Instance with a known feasible point f0 and mixed slack signs."""
    n = int(rng.integers(2, max_n + 1))
    M = int(rng.integers(1, max_m + 1))
    G = rng.standard_normal((M, n))
    f0 = rng.standard_normal(n) * rng.uniform(0.2, 1.5)
    slack = np.where(rng.random(M) < 0.4, 0.0, rng.random(M))
    h = G @ f0 + slack
    return toy_ldp(G, h, c=float(rng.uniform(0.0, 2.0))), f0


def enumeration_projection(G, h):
    """Exact projection of the origin onto {f : G f <= h}.

    Tries every candidate active set of size <= n and keeps the KKT point;
    finite, exact, and independent of the active-set iteration under test.
    """
    norms = np.linalg.norm(G, axis=1)
    Gn = G / norms[:, None]
    hn = h / norms
    M, n = Gn.shape
    if hn.min() >= 0.0:
        return np.zeros(n)
    best = None
    for k in range(1, n + 1):
        for rows in combinations(range(M), k):
            A = Gn[list(rows)]
            rhs = hn[list(rows)]
            try:
                lam = np.linalg.solve(A @ A.T, rhs)
            except np.linalg.LinAlgError:
                continue
            if lam.max() > 1e-9:
                continue  # a multiplier would be negative
            f = A.T @ lam
            if (Gn @ f - hn).max() > 1e-9:
                continue
            if best is None or f @ f < best @ best:
                best = f
    return best


def check_kkt(ldp, res, tol=1e-7):
    norms = np.linalg.norm(ldp.G, axis=1)
    Gn = ldp.G / norms[:, None]
    hn = ldp.h / norms
    resid = Gn @ res.f - hn
    assert resid.max() <= FEASIBILITY_TOL
    mu = res.duals
    assert mu.min() >= -1e-9
    stat = 2.0 * res.f + Gn.T @ mu
    scale = 1.0 + np.linalg.norm(res.f)
    assert np.linalg.norm(stat) <= tol * scale
    comp = np.abs(mu * resid)
    assert comp.max() <= tol * scale


def test_unconstrained_examples():
    pc = ParameterizedCost(K=np.eye(3), k=np.zeros(3), k0=4.0)
    res = solve_unconstrained(pc)
    np.testing.assert_allclose(res.alpha, np.zeros(3))
    assert res.quadratic_cost == pytest.approx(4.0)
    assert res.iterations == 0 and res.status == "optimal"
    pc2 = ParameterizedCost(K=2.0 * np.eye(2), k=[2.0, 0.0], k0=1.0)
    res2 = solve_unconstrained(pc2)
    np.testing.assert_allclose(res2.alpha, [-0.5, 0.0])
    assert res2.quadratic_cost == pytest.approx(0.5)


def test_qp_no_constraints_returns_center():
    ldp = toy_ldp(np.zeros((0, 3)), np.zeros(0), n=3, c=1.5)
    res = solve_qp(ldp)
    np.testing.assert_allclose(res.f, np.zeros(3))
    assert res.quadratic_cost == pytest.approx(1.5)
    assert res.status == "optimal" and res.active_rows == ()


def test_qp_scalar_bound():
    # min f^2 subject to f >= 1.
    res = solve_qp(toy_ldp([[-1.0]], [-1.0]))
    np.testing.assert_allclose(res.f, [1.0], atol=1e-12)
    assert res.quadratic_cost == pytest.approx(1.0)
    assert res.active_rows == (0,)


def test_qp_halfspace_projection():
    # min ||f||^2 subject to f1 + f2 >= 1.
    ldp = toy_ldp([[-1.0, -1.0]], [-1.0])
    res = solve_qp(ldp)
    np.testing.assert_allclose(res.f, [0.5, 0.5], atol=1e-12)
    assert res.quadratic_cost == pytest.approx(0.5)
    check_kkt(ldp, res)


def test_lp_halfspace_vertex_and_bound_equality():
    ldp = toy_ldp([[-1.0, -1.0]], [-1.0])
    qp = solve_qp(ldp)
    lp = solve_lp(ldp)
    assert lp.status == "optimal"
    np.testing.assert_allclose(np.abs(lp.f).sum(), 1.0, atol=1e-12)
    assert lp.quadratic_cost == pytest.approx(1.0)
    pc = ParameterizedCost(K=np.eye(2), k=np.zeros(2), k0=0.0)
    report = suboptimality_report(qp, lp, pc)
    assert report.holds
    assert report.bound == pytest.approx(1.0)
    assert report.j_lp == pytest.approx(report.bound)


def test_qp_random_instances_kkt_and_oracles():
    rng = np.random.default_rng(71)
    compared = 0
    for _ in range(200):
        ldp, f0 = random_feasible_ldp(rng)
        res = solve_qp(ldp)
        assert res.status == "optimal"
        check_kkt(ldp, res)
        # never worse than feasible competitors: random draws plus the
        # segment toward the known feasible point (feasible by convexity)
        width = 0.5 * (1.0 + np.linalg.norm(res.f))
        cand = res.f + width * rng.standard_normal((30, ldp.n_free))
        segment = [t * res.f + (1.0 - t) * f0
                   for t in (0.0, 0.25, 0.5, 0.75)]
        cand = np.vstack([cand, segment])
        feas = (ldp.G @ cand.T <= ldp.h[:, None] + 1e-12).all(axis=0)
        for z in cand[feas]:
            assert z @ z >= res.f @ res.f - 1e-9
            compared += 1
    assert compared >= 800


def test_qp_matches_enumeration_oracle():
    rng = np.random.default_rng(73)
    for _ in range(25):
        ldp, _ = random_feasible_ldp(rng, max_n=5, max_m=12)
        res = solve_qp(ldp)
        assert res.status == "optimal"
        ref = enumeration_projection(ldp.G, ldp.h)
        assert ref is not None
        np.testing.assert_allclose(
            res.f @ res.f, ref @ ref, rtol=1e-9, atol=1e-12
        )
        np.testing.assert_allclose(
            res.f, ref, atol=1e-7 * (1.0 + np.linalg.norm(ref))
        )


def test_lp_random_instances_feasible_and_bounded():
    rng = np.random.default_rng(79)
    for _ in range(200):
        ldp, _ = random_feasible_ldp(rng, max_m=40)
        qp = solve_qp(ldp)
        lp = solve_lp(ldp)
        assert lp.status == "optimal"
        norms = np.linalg.norm(ldp.G, axis=1)
        resid = (ldp.G @ lp.f - ldp.h) / norms
        assert resid.max() <= FEASIBILITY_TOL
        assert qp.quadratic_cost <= lp.quadratic_cost + 1e-9
        pc = ParameterizedCost(
            K=np.eye(ldp.n_free), k=np.zeros(ldp.n_free), k0=0.0
        )
        assert suboptimality_report(qp, lp, pc).holds


def test_lp_agrees_with_qp_when_origin_feasible():
    rng = np.random.default_rng(83)
    for _ in range(25):
        n = int(rng.integers(2, 8))
        M = int(rng.integers(1, 20))
        G = rng.standard_normal((M, n))
        h = rng.uniform(0.1, 2.0, M)
        ldp = toy_ldp(G, h)
        qp = solve_qp(ldp)
        lp = solve_lp(ldp)
        np.testing.assert_allclose(qp.alpha, np.zeros(n), atol=1e-12)
        np.testing.assert_allclose(
            np.linalg.norm(qp.alpha - lp.alpha), 0.0, atol=1e-8
        )


def test_iteration_limit_status():
    ldp = toy_ldp(-np.eye(2), [-1.0, -1.0])
    res = solve_qp(ldp, max_iter=1)
    assert res.status == "iteration_limit"
    assert res.alpha is None
    full = solve_qp(ldp)
    np.testing.assert_allclose(full.f, [1.0, 1.0], atol=1e-12)
    lp_res = solve_lp(ldp, max_iter=1)
    assert lp_res.status == "iteration_limit"


def test_infeasible_rows_detected():
    # f1 <= -1 and f1 >= 0 cannot both hold.
    ldp = toy_ldp([[1.0, 0.0], [-1.0, 0.0]], [-1.0, 0.0])
    assert solve_qp(ldp).status == "infeasible"
    assert solve_lp(ldp).status == "infeasible"


def test_violated_constant_row_is_infeasible():
    ldp = toy_ldp([[0.0, 0.0], [1.0, 0.0]], [-1.0, 1.0])
    assert solve_qp(ldp).status == "infeasible"
    assert solve_lp(ldp).status == "infeasible"


def test_satisfied_constant_row_is_dropped():
    ldp = toy_ldp([[0.0], [-1.0]], [2.0, -1.0])
    res = solve_qp(ldp)
    np.testing.assert_allclose(res.f, [1.0], atol=1e-12)
    assert res.active_rows == (1,)


def test_warm_start_resolves_in_zero_iterations():
    rng = np.random.default_rng(89)
    ldp, _ = random_feasible_ldp(rng, max_n=6, max_m=30)
    cold = solve_qp(ldp)
    warm = solve_qp(ldp, warm_start=cold.active_rows)
    assert warm.status == "optimal"
    assert warm.iterations == 0
    np.testing.assert_allclose(warm.f, cold.f, atol=1e-10)


def test_repeat_solves_bitwise_identical():
    rng = np.random.default_rng(97)
    ldp, _ = random_feasible_ldp(rng)
    a = solve_qp(ldp)
    b = solve_qp(ldp)
    assert np.array_equal(a.f, b.f) and a.iterations == b.iterations
    la = solve_lp(ldp)
    lb = solve_lp(ldp)
    assert np.array_equal(la.f, lb.f) and la.iterations == lb.iterations


def test_suboptimality_report_requires_optimal_pair():
    ldp = toy_ldp([[1.0, 0.0], [-1.0, 0.0]], [-1.0, 0.0])
    bad = solve_qp(ldp)
    good = solve_qp(toy_ldp([[-1.0, -1.0]], [-1.0]))
    pc = ParameterizedCost(K=np.eye(2), k=np.zeros(2), k0=0.0)
    with pytest.raises(FlatpolyError):
        suboptimality_report(bad, good, pc)
