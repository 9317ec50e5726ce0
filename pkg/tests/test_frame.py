import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from osplit.core import CompositeProblem, OracleTally, SmoothTerm, make_rng, zero_g
from osplit.frame import (GmcoFailure, Monitor, SolverConfig, build_phi, gmco,
                          gmco_iteration_bound, inner_tolerance, ms_run, ms_step_sizes,
                          restart_schedule, solve)
from osplit.inner import InnerReport, InnerSolver
from osplit.problems import QuadraticSpec, make_quadratic, quadratic_family


def hessian(term, n):
    base = term.grad(np.zeros(n))
    return np.column_stack([term.grad(e) - base for e in np.eye(n)])


def exact_solver(problem):
    """Closed-form inner minimizer for a quadratic ``g``."""
    H = hessian(problem.g, problem.n)

    def run(phi, stop, rng, tally=None, start=None):
        v = np.linalg.solve(H + phi.alpha * np.eye(problem.n), -phi.beta)
        return InnerReport(v, 1, 0, 0.0)

    return InnerSolver("exact", None, run, lambda g: 1.0, lambda u, g: 1)


# --- step sizes ---------------------------------------------------------------

@pytest.mark.parametrize("A, L, a, A_next", [
    (0.0, 1.0, 1.0, 1.0),
    (1.0, 1.0, (1 + math.sqrt(5)) / 2, (3 + math.sqrt(5)) / 2),
    (0.0, 4.0, 0.25, 0.25),
])
def test_step_size_examples(A, L, a, A_next):
    got_a, got_A = ms_step_sizes(A, L)
    assert got_a == pytest.approx(a, rel=1e-14)
    assert got_A == pytest.approx(A_next, rel=1e-14)


@given(st.floats(1e-2, 1e4), st.integers(1, 300))
def test_step_size_root_and_growth(L, N):
    A = 0.0
    for k in range(1, N + 1):
        a, A_next = ms_step_sizes(A, L)
        assert abs(L * a * a - a - A) <= 1e-10 * (1 + A)
        assert A_next > A
        assert A_next >= k * k / (4 * L) * (1 - 1e-12)
        A = A_next


def test_interpolation_weights():
    a, A_next = ms_step_sizes(1.0, 1.0)
    wy, wz = 1.0 / A_next, a / A_next
    assert wy == pytest.approx(0.3820, abs=5e-5)
    assert wz == pytest.approx(0.6180, abs=5e-5)
    assert wy + wz == pytest.approx(1.0, abs=1e-15)


# --- subproblem -------------------------------------------------------------

def linear_h_problem(c, n=2, L_h=2.0):
    c = np.asarray(c, dtype=float)
    h = SmoothTerm(lambda x: float(c @ x), lambda x: c.copy(), L_h)
    return CompositeProblem(n, h, zero_g(n), 0.0, L_h)


def test_build_phi_at_origin():
    p = linear_h_problem([0.5, -1.5], L_h=2.0)
    phi = build_phi(np.zeros(2), np.zeros(2), 1.0, 2.0, p, OracleTally())
    assert np.array_equal(phi.beta, [0.5, -1.5]) and phi.alpha == 3.0


def test_build_phi_example():
    p = linear_h_problem([3.0, 3.0], L_h=2.0)
    t = OracleTally()
    phi = build_phi(np.array([0.0, 1.0]), np.array([1.0, 0.0]), 1.0, 2.0, p, t)
    assert np.array_equal(phi.beta, [2.0, 1.0]) and phi.alpha == 3.0
    assert t.h_grad_calls == 1


def test_build_phi_matches_direct_gradient():
    prob = quadratic_family(6, 2.0, 5.0, 0.1, seed=2)
    r = make_rng(5)
    L, L_h = 0.7, prob.L_h
    zp, z0 = r.standard_normal(6), r.standard_normal(6)
    phi = build_phi(zp, z0, L, L_h, prob, OracleTally())
    gh = prob.h.grad(zp)

    def direct(z):
        return (gh @ (z - zp) + prob.g.value(z) + L / 2 * np.sum((z - z0) ** 2)
                + L_h / 2 * np.sum((z - zp) ** 2))

    for _ in range(20):
        z = r.standard_normal(6)
        fd = np.array([(direct(z + 1e-5 * e) - direct(z - 1e-5 * e)) / 2e-5 for e in np.eye(6)])
        ana = phi.beta + phi.alpha * z + prob.g.grad(z)
        assert np.linalg.norm(fd - ana) <= 1e-6 * max(1.0, np.linalg.norm(ana))


def test_inner_tolerance_example():
    assert inner_tolerance(1.0, 1.0, 1.0, 1.0) == pytest.approx(0.005, rel=1e-15)


# --- middle loop ------------------------------------------------------------

def test_gmco_stationary_start_exits_after_one_check():
    prob = quadratic_family(8, 1.0, 10.0, 0.5, seed=1)
    t = OracleTally()
    res = gmco(prob.x_star, prob.L_h, prob, exact_solver(prob), SolverConfig(), t)
    assert res.iterations == 1 and t.criterion_checks == 1
    assert np.allclose(res.zeta, prob.x_star, atol=1e-12)


def test_gmco_iteration_count_bound():
    for seed in range(10):
        prob = quadratic_family(10, 1.0, 20.0, 0.0, seed=seed)
        L = prob.L_h
        z0 = make_rng(seed).standard_normal(10)
        res = gmco(z0, L, prob, exact_solver(prob), SolverConfig(epsilon=1e-14), OracleTally())
        assert res.criterion_lhs <= res.criterion_rhs
        assert res.iterations <= gmco_iteration_bound(L, prob.L_h, prob.L_f) + 1


def test_gmco_failure_carries_best():
    prob = quadratic_family(10, 1.0, 20.0, 0.0, seed=0)
    z0 = make_rng(0).standard_normal(10)
    cfg = SolverConfig(max_gmco_iters=1)
    with pytest.raises(GmcoFailure) as exc:
        # a tiny L makes one pass insufficient
        gmco(z0, 1e-4, prob, exact_solver(prob), cfg, OracleTally())
    assert exc.value.best.shape == (10,)


def test_gmco_budgeted_mode_runs_fixed_count():
    prob = quadratic_family(5, 1.0, 3.0, 0.5, seed=0)
    cfg = SolverConfig(inner_stop_mode="budgeted", R=1.0)
    t = OracleTally()
    res = gmco(np.ones(5), 1.0, prob, "apg", cfg, t)
    assert res.iterations == gmco_iteration_bound(1.0, prob.L_h, prob.L_f)
    assert t.criterion_checks == 0


# --- outer loop ---------------------------------------------------------------

def test_ms_run_fixed_point():
    prob = quadratic_family(6, 1.0, 5.0, 0.1, seed=3)
    y = ms_run(prob.x_star, prob.L_h, 5, prob, exact_solver(prob), SolverConfig(), OracleTally())
    assert np.allclose(y, prob.x_star, atol=1e-12)


def test_ms_run_single_step_bound():
    for seed in range(5):
        prob = quadratic_family(8, 1.0, 30.0, 0.0, seed=seed)
        L = prob.L_h
        y = ms_run(np.zeros(8), L, 1, prob, exact_solver(prob), SolverConfig(epsilon=1e-14),
                   OracleTally())
        R2 = float(np.sum(prob.x_star ** 2))
        assert prob.f_value(y) - prob.f_star <= 2 * L * R2


def test_ms_run_logs_state():
    prob = quadratic_family(4, 1.0, 2.0, 0.1, seed=0)
    log = []
    ms_run(np.zeros(4), 1.0, 4, prob, exact_solver(prob), SolverConfig(), OracleTally(),
           state_log=log)
    A_prev = 0.0
    for a, A in log:
        assert A == pytest.approx(A_prev + a) and abs(a * a - a - A_prev) <= 1e-10 * (1 + A_prev)
        A_prev = A


def test_convex_rate_envelope():
    for seed in range(3):
        prob = quadratic_family(20, 1.0, 50.0, 0.0, seed=seed, spectrum="log")
        L = prob.L_h
        R2 = float(np.sum(prob.x_star ** 2))
        t = OracleTally()
        cfg = SolverConfig(epsilon=1e-14)
        mon = Monitor(prob, t, cfg)
        ms_run(np.zeros(20), L, 40, prob, exact_solver(prob), cfg, t, monitor=mon)
        for ev in mon.events:
            assert ev.f_value - prob.f_star <= 2 * L * R2 / ev.k ** 2


def test_restart_contraction():
    for seed in range(10):
        prob = quadratic_family(10, 1.0, 20.0, 0.05, seed=seed)
        L = prob.L_h
        N0, _ = restart_schedule(prob.mu, L, 1.0, 1e-6)
        x0 = make_rng(seed).standard_normal(10)
        y = ms_run(x0, L, N0, prob, exact_solver(prob), SolverConfig(epsilon=1e-14), OracleTally())
        assert np.sum((y - prob.x_star) ** 2) <= 0.6 * np.sum((x0 - prob.x_star) ** 2)


# --- restarts and top level -------------------------------------------------

def test_restart_schedule_examples():
    assert restart_schedule(1.0, 2.0, 1.0, 1.0)[0] == 4
    assert restart_schedule(1.0, 2.0, 4.0, 1.0)[1] == 4
    assert restart_schedule(1.0, 2.0, 1.0, 5.0)[1] == 1
    with pytest.raises(ValueError):
        restart_schedule(0.0, 1.0, 1.0, 1.0)


def test_solve_quadratic_reaches_gap():
    prob = quadratic_family(30, 1.0, 50.0, 1e-2, seed=4)
    res = solve(prob, SolverConfig(epsilon=1e-8), "apg")
    assert res.gap <= 1e-8 and res.status == "converged"


def test_solve_h_calls_order_for_zero_g():
    n = 30
    r = make_rng(9)
    Q, _ = np.linalg.qr(r.standard_normal((n, n)))
    s = np.linspace(1e-2, 1.0, n)
    H = (Q * s) @ Q.T
    prob = make_quadratic(QuadraticSpec(H, np.zeros((n, n)), r.standard_normal(n)))
    eps = 1e-8
    res = solve(prob, SolverConfig(epsilon=eps), "apg")
    R = float(np.linalg.norm(prob.x_star))
    scale = math.sqrt(prob.L_h / prob.mu) * math.log2(prob.mu * R * R / eps)
    assert res.gap <= eps
    assert scale / 10 <= res.tally.h_grad_calls <= 10 * scale


def test_solve_loose_target_is_trivial():
    prob = quadratic_family(10, 1.0, 5.0, 0.1, seed=0)
    cfg = SolverConfig(epsilon=1e6, stop_at_target=True)
    res = solve(prob, cfg, "apg")
    assert res.status == "converged" and res.outer_iterations == 0
    assert res.tally.h_grad_calls == 0


def test_solve_phase_sum_and_gmco_certificates():
    prob = quadratic_family(10, 1.0, 10.0, 1e-2, mode="coordinate", seed=2)
    res = solve(prob, SolverConfig(epsilon=1e-6), "acdm")
    assert res.tally.phase_sum() == res.tally.total
    for g in res.gmco_results:
        assert g.accepted


def test_solve_rejects_mode_mismatch():
    prob = quadratic_family(5, 1.0, 5.0, 0.1, seed=0)
    with pytest.raises(ValueError):
        solve(prob, SolverConfig(), "acdm")


def test_solve_budget_status():
    prob = quadratic_family(20, 1.0, 100.0, 1e-4, seed=1)
    res = solve(prob, SolverConfig(epsilon=1e-10, max_h_calls=20), "apg")
    assert res.status == "budget_exhausted"


def test_config_validation():
    for bad in (dict(epsilon=0), dict(delta=1.0), dict(L=-1.0), dict(R=0.0),
                dict(inner_stop_mode="x")):
        with pytest.raises(ValueError):
            SolverConfig(**bad).validate()
