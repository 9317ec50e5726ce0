"""The three-loop framework: accelerated proximal outer loop, restarts, and
the composite gradient middle loop that hands an inner problem to ``M_inn``.

Outer loop (:func:`ms_run`): Monteiro-Svaiter accelerated proximal method
with prox parameter ``L``; each step asks :func:`gmco` for an approximate
minimizer of ``F(y) = f(y) + (L/2)|y - x|^2`` accepted by the relative test
``|grad F(y)| <= (L/2)|y - x|``.

Middle loop (:func:`gmco`): linearize ``h`` at the previous iterate and keep
``g`` plus both quadratic anchors as the composite part; the resulting
subproblem has the inner-solver structure with ``alpha = L + L_h``
(:func:`build_phi`).

Strongly convex problems run the outer loop in restarted stages of
``N0 = ceil(sqrt(8L/mu))`` iterations (:func:`restart_schedule`).
"""

from __future__ import annotations

import dataclasses
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (CompositeProblem, Counts, OracleTally, check_vector, grad_f,
                   grad_g_full, grad_h, make_rng, value_f)
from .inner import (CertifiedGap, FixedIters, InnerBudgetExceeded, InnerProblem,
                    InnerSolver, get_inner_solver)

__all__ = [
    "SolverConfig",
    "MsState",
    "GmcoResult",
    "GmcoFailure",
    "OuterBudgetExceeded",
    "TraceEvent",
    "Monitor",
    "SolveResult",
    "ms_step_sizes",
    "build_phi",
    "inner_tolerance",
    "gmco_iteration_bound",
    "budgeted_inner_units",
    "gmco",
    "ms_run",
    "restart_schedule",
    "solve",
]


@dataclass
class SolverConfig:
    """Framework parameters.

    ``L`` defaults to ``L_h`` and ``mu`` to the problem's modulus. ``R`` must
    bound ``|x0 - x*|``; when omitted it is taken from a known ``x_star``.
    With ``stop_at_target`` and a known ``f_star`` the outer loop stops as soon
    as ``f(y) - f* <= epsilon`` (checked with metered f-value evaluations).
    """

    L: Optional[float] = None
    mu: Optional[float] = None
    epsilon: float = 1e-6
    delta: float = 0.1
    R: Optional[float] = None
    inner_stop_mode: str = "certified"
    C1: float = 1.0
    c_cert: float = 1.0
    max_outer_iters: int = 1_000_000
    max_gmco_iters: int = 10_000
    max_inner_units: Optional[int] = None
    max_h_calls: Optional[int] = None
    seed: int = 0
    stop_at_target: bool = False
    reuse_gradients: bool = True
    log_every: int = 1

    def validate(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.L is not None and not self.L > 0:
            raise ValueError("L must be positive")
        if self.R is not None and not self.R > 0:
            raise ValueError("R must be positive")
        if self.mu is not None and self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.inner_stop_mode not in ("certified", "budgeted"):
            raise ValueError("inner_stop_mode must be 'certified' or 'budgeted'")
        if self.log_every < 1:
            raise ValueError("log_every must be at least 1")


@dataclass
class MsState:
    A: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    k: int = 0


@dataclass
class GmcoResult:
    zeta: np.ndarray
    iterations: int
    criterion_lhs: Optional[float]
    criterion_rhs: Optional[float]
    grad_f: Optional[np.ndarray] = None
    stationary: bool = False

    @property
    def accepted(self) -> bool:
        if self.criterion_lhs is None:
            return True
        return self.stationary or self.criterion_lhs <= self.criterion_rhs


class GmcoFailure(RuntimeError):
    def __init__(self, message: str, best: np.ndarray, diagnostics: dict):
        super().__init__(message)
        self.best = best
        self.diagnostics = diagnostics


class OuterBudgetExceeded(RuntimeError):
    pass


@dataclass
class TraceEvent:
    stage: int
    k: int
    f_value: Optional[float]
    criterion_lhs: Optional[float]
    criterion_rhs: Optional[float]
    tally: Counts
    elapsed: float


def ms_step_sizes(A_k: float, L: float) -> tuple[float, float]:
    """Positive root ``a`` of ``L a^2 - a - A_k = 0`` and ``A_k + a``."""
    a = (1.0 / L + math.sqrt(1.0 / (L * L) + 4.0 * A_k / L)) / 2.0
    return a, A_k + a


def build_phi(zeta_prev, zeta0, L: float, L_h: float, problem: CompositeProblem,
              tally: OracleTally, grad_h_prev: Optional[np.ndarray] = None) -> InnerProblem:
    """Middle-loop subproblem in inner-solver form.

    ``phi(z) = <grad h(zp), z - zp> + g(z) + (L/2)|z - z0|^2 + (L_h/2)|z - zp|^2``
    equals ``<beta, z> + ((L + L_h)/2)|z|^2 + g(z)`` up to a constant, with
    ``beta = grad h(zp) - L z0 - L_h zp``. One ``grad h`` call unless the
    gradient at ``zp`` is passed in.
    """
    zeta_prev = check_vector(zeta_prev, problem.n, "zeta_prev")
    zeta0 = check_vector(zeta0, problem.n, "zeta0")
    gh = grad_h(problem, zeta_prev, tally) if grad_h_prev is None else grad_h_prev
    beta = gh - L * zeta0 - L_h * zeta_prev
    return InnerProblem(beta, L + L_h, problem.g)


def inner_tolerance(L: float, L_h: float, L_f: float, D: float) -> float:
    """``L^4 D^2 / (8 L_h (3L + 2 L_f)^2)``: inner accuracy that keeps the
    middle loop's relative acceptance test reachable."""
    return L ** 4 * D * D / (8.0 * L_h * (3.0 * L + 2.0 * L_f) ** 2)


def gmco_iteration_bound(L: float, L_h: float, L_f: float) -> int:
    """``ceil((4 L_h / L) ln((3L + 2L_f)^2 L_h / L^3))``, at least 1."""
    arg = (3.0 * L + 2.0 * L_f) ** 2 * L_h / L ** 3
    return max(1, math.ceil(4.0 * L_h / L * math.log(max(arg, 1.0))))


def budgeted_inner_units(tau_g: float, L: float, L_h: float, C1: float, delta: float,
                         mu: float, R: Optional[float] = None,
                         epsilon: Optional[float] = None) -> int:
    """Basic-oracle budget of one inner solve in budgeted mode.

    ``(tau_g / sqrt(L + L_h)) ln(C1 L_h / (delta sqrt(mu L)))`` when ``mu > 0``,
    ``... ln(C1 L_h R / (delta sqrt(eps L)))`` when ``mu = 0``.
    """
    if mu > 0:
        arg = C1 * L_h / (delta * math.sqrt(mu * L))
    else:
        if R is None or epsilon is None:
            raise ValueError("convex budget needs R and epsilon")
        arg = C1 * L_h * R / (delta * math.sqrt(epsilon * L))
    return max(1, math.ceil(tau_g / math.sqrt(L + L_h) * math.log(max(arg, math.e))))


class Monitor:
    """Collects trace events and middle-loop results, and decides early stops."""

    def __init__(self, problem: CompositeProblem, tally: OracleTally, config: SolverConfig,
                 callback: Optional[Callable[[TraceEvent], None]] = None):
        self.problem = problem
        self.tally = tally
        self.config = config
        self.callback = callback
        self.events: list[TraceEvent] = []
        self.gmco_results: list[GmcoResult] = []
        self.t0 = time.perf_counter()
        self.k = 0
        self.reached = False
        self.best_x: Optional[np.ndarray] = None
        self.best_f = math.inf

    @property
    def target_known(self) -> bool:
        return self.config.stop_at_target and self.problem.f_star is not None

    def record(self, stage: int, y: np.ndarray, res: Optional[GmcoResult], force: bool = False) -> bool:
        """Log one outer iterate; returns True once the target gap is reached."""
        fv = None
        if force or self.target_known or self.k % self.config.log_every == 0:
            with self.tally.phase("monitor"):
                fv = value_f(self.problem, y, self.tally)
            if fv < self.best_f:
                self.best_f, self.best_x = fv, y.copy()
        ev = TraceEvent(stage, self.k, fv,
                        None if res is None else res.criterion_lhs,
                        None if res is None else res.criterion_rhs,
                        self.tally.snapshot(), time.perf_counter() - self.t0)
        self.events.append(ev)
        if self.callback is not None:
            self.callback(ev)
        if self.target_known and fv is not None:
            if fv - self.problem.f_star <= self.config.epsilon:
                self.reached = True
        cap = self.config.max_h_calls
        if not self.reached and cap is not None and self.tally.h_grad_calls >= cap:
            raise OuterBudgetExceeded(f"h-gradient budget {cap} reached")
        return self.reached


def _resolve_solver(inner_solver) -> InnerSolver:
    return get_inner_solver(inner_solver) if isinstance(inner_solver, str) else inner_solver


def gmco(zeta0, L: float, problem: CompositeProblem, inner_solver, config: SolverConfig,
         tally: OracleTally, rng: Optional[np.random.Generator] = None,
         grad_h0: Optional[np.ndarray] = None) -> GmcoResult:
    """Composite gradient method on ``F(z) = f(z) + (L/2)|z - zeta0|^2``.

    Repeats: build the subproblem at the previous iterate, solve it with the
    inner method (certified to the tolerance of :func:`inner_tolerance` or on
    a fixed budget), then test ``|grad F(z)| <= (L/2)|z - zeta0|``. Each test
    costs one ``grad h`` and one full ``grad g``, charged to the
    ``criterion`` phase. A test that finds ``grad F`` at the rounding floor
    also accepts (the relative test is then meaningless).

    In budgeted mode the tests are skipped and a fixed number of iterations
    (:func:`gmco_iteration_bound`) is run.
    """
    solver = _resolve_solver(inner_solver)
    rng = rng if rng is not None else make_rng(config.seed)
    zeta0 = check_vector(zeta0, problem.n, "zeta0").copy()
    L_h, L_f = problem.L_h, problem.L_f
    budgeted = config.inner_stop_mode == "budgeted"
    mu = problem.mu if config.mu is None else config.mu
    if budgeted:
        n_iters = gmco_iteration_bound(L, L_h, L_f)
        units = budgeted_inner_units(solver.tau_g(problem.g), L, L_h, config.C1, config.delta,
                                     mu, config.R, config.epsilon)
        inner_stop = FixedIters(solver.iters_for_units(units, problem.g))
    else:
        n_iters = config.max_gmco_iters
    floor_D = math.sqrt(config.epsilon / L)

    zeta_prev = zeta0
    gh_prev = grad_h0
    best, best_ratio = zeta0, math.inf
    for k in range(1, n_iters + 1):
        with tally.phase("gmco"):
            phi = build_phi(zeta_prev, zeta0, L, L_h, problem, tally, gh_prev)
        if not budgeted:
            D = max(float(np.linalg.norm(zeta_prev - zeta0)), floor_D)
            inner_stop = CertifiedGap(inner_tolerance(L, L_h, L_f, D),
                                      max_units=config.max_inner_units, c_cert=config.c_cert)
        with tally.phase("inner"):
            rep = solver.solve(phi, inner_stop, rng, tally, start=zeta_prev)
        zeta = rep.v_hat
        if budgeted:
            if k == n_iters:
                return GmcoResult(zeta, k, None, None)
            zeta_prev, gh_prev = zeta, None
            continue
        with tally.phase("criterion"):
            gh = grad_h(problem, zeta, tally)
            gg = grad_g_full(problem, zeta, tally)
            tally.charge(checks=1)
        gf = gh + gg
        step = zeta - zeta0
        lhs = float(np.linalg.norm(gf + L * step))
        rhs = 0.5 * L * float(np.linalg.norm(step))
        scale = 1.0 + L_f * float(np.linalg.norm(zeta)) + float(np.linalg.norm(gh))
        stationary = lhs <= 1e-12 * scale
        if lhs <= rhs or stationary:
            return GmcoResult(zeta, k, lhs, rhs, gf, stationary=stationary and lhs > rhs)
        ratio = lhs / rhs if rhs > 0 else math.inf
        if ratio < best_ratio:
            best, best_ratio = zeta, ratio
        zeta_prev = zeta
        gh_prev = gh if config.reuse_gradients else None
    raise GmcoFailure(f"middle loop did not pass its acceptance test in {n_iters} iterations",
                      best, {"best_ratio": best_ratio, "iterations": n_iters})


def ms_run(x0, L: float, N: int, problem: CompositeProblem, inner_solver, config: SolverConfig,
           tally: OracleTally, rng: Optional[np.random.Generator] = None,
           monitor: Optional[Monitor] = None, stage: int = 0,
           state_log: Optional[list] = None) -> np.ndarray:
    """``N`` steps of the accelerated proximal outer loop from ``x0``; returns
    ``y^N`` (or the current ``y`` if the monitor reports the target reached)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    rng = rng if rng is not None else make_rng(config.seed)
    x0 = check_vector(x0, problem.n, "x0")
    st = MsState(0.0, x0.copy(), x0.copy(), x0.copy())
    for _ in range(N):
        if monitor is not None and monitor.k >= config.max_outer_iters:
            raise OuterBudgetExceeded(f"outer iteration cap {config.max_outer_iters} reached")
        a, A_next = ms_step_sizes(st.A, L)
        st.x = (st.A / A_next) * st.y + (a / A_next) * st.z
        res = gmco(st.x, L, problem, inner_solver, config, tally, rng)
        st.y = res.zeta
        if config.reuse_gradients and res.grad_f is not None:
            gf = res.grad_f
        else:
            with tally.phase("outer"):
                gf = grad_f(problem, st.y, tally)
        st.z = st.z - a * gf
        st.A = A_next
        st.k += 1
        if state_log is not None:
            state_log.append((a, st.A))
        if monitor is not None:
            monitor.gmco_results.append(res)
            monitor.k += 1
            if monitor.record(stage, st.y, res):
                break
    return st.y


def restart_schedule(mu: float, L: float, R: float, epsilon: float) -> tuple[int, int]:
    """Stage length ``N0 = ceil(sqrt(8L/mu))`` and stage count
    ``T = max(1, ceil(log2(mu R^2 / eps)))``."""
    if not mu > 0:
        raise ValueError("restarts need mu > 0")
    if not (epsilon > 0 and R > 0 and L > 0):
        raise ValueError("L, R and epsilon must be positive")
    N0 = math.ceil(math.sqrt(8.0 * L / mu))
    ratio = mu * R * R / epsilon
    T = max(1, math.ceil(math.log2(ratio))) if ratio > 1 else 1
    return N0, T


@dataclass
class SolveResult:
    x_hat: np.ndarray
    f_value: float
    gap: Optional[float]
    status: str
    tally: OracleTally
    events: list
    gmco_results: list
    outer_iterations: int
    wall_time: float
    schedule: dict = field(default_factory=dict)
    message: str = ""

    @property
    def reached(self) -> bool:
        return self.status == "converged"


def solve(problem: CompositeProblem, config: SolverConfig, inner_solver,
          x0=None, tally: Optional[OracleTally] = None,
          callback: Optional[Callable[[TraceEvent], None]] = None) -> SolveResult:
    """Run the framework.

    ``mu > 0``: restarted stages (``T`` stages of ``N0`` outer steps, each
    starting from the previous output). ``mu = 0``: one run of
    ``ceil(sqrt(L R^2 / eps))`` outer steps. Budget exhaustion anywhere ends
    the run with status ``"budget_exhausted"`` and the best iterate seen.
    """
    config.validate()
    solver = _resolve_solver(inner_solver)
    if not solver.accepts(problem.g):
        raise ValueError(f"inner solver {solver.name!r} cannot use a {problem.g.mode.value} g oracle")
    tally = tally if tally is not None else OracleTally()
    L = problem.L_h if config.L is None else config.L
    mu = problem.mu if config.mu is None else config.mu
    if L > 2.0 * problem.L_h:
        warnings.warn(f"L = {L:g} exceeds 2 L_h = {2 * problem.L_h:g}; middle-loop rate "
                      "guarantees assume L <= 2 L_h", stacklevel=2)
    x0 = np.zeros(problem.n) if x0 is None else check_vector(x0, problem.n, "x0").copy()
    R = config.R
    if R is None:
        if problem.x_star is None:
            raise ValueError("config.R is required when x_star is unknown")
        R = max(float(np.linalg.norm(x0 - problem.x_star)), 1e-300)
    config = dataclasses.replace(config, R=R)
    rng = make_rng(config.seed)
    monitor = Monitor(problem, tally, config, callback)
    if mu > 0:
        N0, T = restart_schedule(mu, L, R, config.epsilon)
        schedule = {"branch": "strongly_convex", "N0": N0, "T": T, "L": L, "mu": mu, "R": R}
    else:
        N0 = max(1, math.ceil(math.sqrt(L * R * R / config.epsilon)))
        T = 1
        schedule = {"branch": "convex", "N": N0, "L": L, "R": R}

    status, message = "converged", ""
    x = x0
    monitor.record(0, x, None, force=True)
    t0 = time.perf_counter()
    if not monitor.reached:
        try:
            for stage in range(1, T + 1):
                x = ms_run(x, L, N0, problem, solver, config, tally, rng, monitor, stage)
                if monitor.reached:
                    break
        except (GmcoFailure, InnerBudgetExceeded, OuterBudgetExceeded) as exc:
            status, message = "budget_exhausted", str(exc)
            if monitor.best_x is not None:
                x = monitor.best_x
    if monitor.target_known and not monitor.reached and status == "converged":
        status = "target_missed"
    with tally.phase("monitor"):
        fval = value_f(problem, x, tally)
    gap = None if problem.f_star is None else fval - problem.f_star
    return SolveResult(x, fval, gap, status, tally, monitor.events, monitor.gmco_results,
                       monitor.k, time.perf_counter() - t0, schedule, message)
