"""Benchmark harness: framework runs and baselines with metered oracles,
trace CSVs and JSON summaries.

Methods
-------
``ms-apg``, ``ms-acdm``, ``ms-katyusha``
    The three-loop framework with the named inner solver.
``fgm``
    Nesterov's fast gradient method on the whole of ``f``.
``coord-fgm``
    Accelerated non-uniform coordinate descent on the whole of ``f``; one
    partial derivative of ``h`` and one of ``g`` per iteration.
``katyusha-full``
    Katyusha on the components ``h + g_k``; every stochastic step needs a
    full ``grad h``.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (CompositeProblem, Counts, CsrMatrix, GMode, DiscreteSampler, OracleTally,
                   check_vector, grad_f, grad_h, grad_g_full, make_rng, value_f)
from .frame import SolverConfig, solve
from .inner import get_inner_solver
from .problems import (LogDensitySpec, PRESETS, gen_log_density, gen_svm, load_csv,
                       make_log_density, make_preset, make_svm)

__all__ = [
    "METHODS",
    "TRACE_HEADER",
    "BenchConfig",
    "RunReport",
    "ConfigError",
    "BudgetExhausted",
    "Trace",
    "baseline_fgm",
    "baseline_coord_fgm",
    "baseline_katyusha_full",
    "reference_solve",
    "build_problem",
    "run",
    "sweep",
    "SWEEP_AXES",
    "write_trace_csv",
    "format_number",
]

METHODS = ("ms-apg", "ms-acdm", "ms-katyusha", "fgm", "coord-fgm", "katyusha-full")
_FRAMEWORK = {"ms-apg": "apg", "ms-acdm": "acdm", "ms-katyusha": "katyusha"}
TRACE_HEADER = ("iter,stage,f_value,h_grad_calls,g_basic_units,f_value_evals,"
                "criterion_checks,elapsed_s")
SWEEP_AXES = ("L_h-scale", "L_g-scale", "mu", "eps", "n", "m")

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2


class ConfigError(ValueError):
    """Invalid or incompatible run configuration (exit code 1)."""


class BudgetExhausted(RuntimeError):
    pass


@dataclass
class BenchConfig:
    """One benchmark run.

    ``problem`` names a preset; ``csv`` optionally replaces the preset's data
    (SVM points/labels or the log-density matrix ``A``). ``problem_params``
    are preset overrides such as ``n`` or ``L_h_scale``.
    """

    method: str = "ms-apg"
    problem: str = "quad-cond100"
    csv: Optional[str] = None
    skip_header: bool = False
    problem_params: dict = field(default_factory=dict)
    eps: float = 1e-6
    delta: float = 0.1
    mu: Optional[float] = None
    L: Optional[float] = None
    seed: int = 0
    inner_stop: str = "certified"
    max_outer_budget: Optional[int] = None
    max_gmco_budget: Optional[int] = None
    max_inner_budget: Optional[int] = None
    max_h_budget: Optional[int] = None
    out_dir: Optional[str] = None
    log_every: int = 1
    weight_full_grad: float = 1.0
    deterministic: bool = False
    name: Optional[str] = None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.problem not in PRESETS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {', '.join(sorted(PRESETS))}")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.mu is not None and self.mu < 0:
            raise ConfigError("mu must be nonnegative")
        if self.L is not None and not self.L > 0:
            raise ConfigError("L must be positive")
        if self.inner_stop not in ("certified", "budgeted"):
            raise ConfigError("inner-stop must be certified or budgeted")
        if self.log_every < 1:
            raise ConfigError("log-every must be at least 1")
        if not self.weight_full_grad > 0:
            raise ConfigError("weight-full-grad must be positive")
        for k in ("max_outer_budget", "max_gmco_budget", "max_inner_budget", "max_h_budget"):
            v = getattr(self, k)
            if v is not None and v < 1:
                raise ConfigError(f"{k.replace('_', '-')} must be at least 1")

    @property
    def run_name(self) -> str:
        return self.name or f"{self.method}_{self.problem}_s{self.seed}"


@dataclass
class RunReport:
    method: str
    problem: str
    parameters: dict
    f_value: float
    f_star: Optional[float]
    f_star_source: Optional[str]
    final_gap: Optional[float]
    tally: OracleTally
    wall_time_s: float
    rows: list
    status: str
    exit_code: int
    message: str = ""
    weight_full_grad: float = 1.0
    iterations: int = 0
    gmco_results: list = field(default_factory=list)
    csv_path: Optional[str] = None
    json_path: Optional[str] = None

    @property
    def weighted_h(self) -> float:
        """Full ``grad h`` calls weighted by ``W`` plus single partial derivatives."""
        return self.weight_full_grad * self.tally.h_grad_calls + self.tally.h_partial_units

    def summary(self) -> dict:
        t = self.tally.total
        out = {
            "method": self.method,
            "problem": self.problem,
            "parameters": self.parameters,
            "final_f": self.f_value,
            "f_star": self.f_star,
            "f_star_source": self.f_star_source,
            "final_gap": self.final_gap,
            "iterations": self.iterations,
        }
        out.update({k: int(v) for k, v in t.as_dict().items()})
        out["weighted_h"] = self.weighted_h
        out["phases"] = {k: v.as_dict() for k, v in sorted(self.tally.by_phase.items())}
        out["wall_time_s"] = self.wall_time_s
        out["exit_status"] = self.status
        out["exit_code"] = self.exit_code
        out["message"] = self.message
        return out


# --------------------------------------------------------------------------
# traces


def format_number(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


class Trace:
    """Collects CSV rows; thinned to every ``log_every`` iterations plus the
    last one. In deterministic mode ``elapsed_s`` is written as 0."""

    def __init__(self, tally: OracleTally, log_every: int = 1, deterministic: bool = False):
        self.tally = tally
        self.log_every = log_every
        self.deterministic = deterministic
        self.rows: list[tuple] = []
        self.t0 = time.perf_counter()

    def add(self, it: int, stage: int, f: float, counts: Optional[Counts] = None,
            force: bool = False) -> None:
        if not force and it % self.log_every:
            return
        c = self.tally.snapshot() if counts is None else counts
        el = 0.0 if self.deterministic else time.perf_counter() - self.t0
        self.rows.append((it, stage, float(f), c.h_grad_calls, c.g_basic_units,
                          c.f_value_evals, c.criterion_checks, el))


def write_trace_csv(rows, path) -> None:
    lines = [TRACE_HEADER]
    for r in rows:
        lines.append(",".join(format_number(v) for v in r))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# baselines


@dataclass
class BaselineResult:
    x: np.ndarray
    f_value: float
    iterations: int
    status: str
    message: str = ""


def _target_hit(problem: CompositeProblem, f: float, eps: float) -> bool:
    return problem.f_star is not None and f - problem.f_star <= eps


def _check_h_budget(tally: OracleTally, cap: Optional[int]) -> None:
    if cap is not None and tally.h_grad_calls + tally.h_partial_units >= cap:
        raise BudgetExhausted(f"h-gradient budget {cap} reached")


def baseline_fgm(problem: CompositeProblem, config: BenchConfig, tally: OracleTally,
                 trace: Optional[Trace] = None, x0=None) -> BaselineResult:
    """Fast gradient method on ``f`` with step ``1/L_f``.

    Constant momentum ``(sqrt(L_f) - sqrt(mu)) / (sqrt(L_f) + sqrt(mu))`` when
    ``mu > 0``, ``(k - 1)/(k + 2)`` otherwise. One ``grad f`` (1 h call and
    ``kappa_g`` g units) per iteration.
    """
    L_f = problem.L_f
    mu = problem.mu if config.mu is None else config.mu
    max_iters = config.max_outer_budget or 10_000_000
    x = np.zeros(problem.n) if x0 is None else check_vector(x0, problem.n, "x0").copy()
    x_prev = x.copy()
    mom = (math.sqrt(L_f) - math.sqrt(mu)) / (math.sqrt(L_f) + math.sqrt(mu)) if mu > 0 else None
    with tally.phase("monitor"):
        f = value_f(problem, x, tally)
    if trace is not None:
        trace.add(0, 0, f, force=True)
    best_x, best_f = x, f
    if _target_hit(problem, f, config.eps):
        return BaselineResult(x, f, 0, "converged")
    k = 0
    try:
        while k < max_iters:
            _check_h_budget(tally, config.max_h_budget)
            k += 1
            b = mom if mom is not None else (k - 1.0) / (k + 2.0)
            y = x + b * (x - x_prev)
            with tally.phase("outer"):
                gy = grad_f(problem, y, tally)
            x_prev, x = x, y - gy / L_f
            with tally.phase("monitor"):
                f = value_f(problem, x, tally)
            if f < best_f:
                best_x, best_f = x, f
            if trace is not None:
                trace.add(k, 0, f)
            if _target_hit(problem, f, config.eps):
                return BaselineResult(x, f, k, "converged")
    except BudgetExhausted as exc:
        return BaselineResult(best_x, best_f, k, "budget_exhausted", str(exc))
    status = "target_missed" if problem.f_star is not None else "converged"
    return BaselineResult(x, f, k, status, f"iteration budget {max_iters} reached")


class _CoordState:
    """Partial derivatives of ``h`` and ``g`` at ``x = tau z + (1 - tau) y``
    from linear images of ``y`` and ``z`` that are updated incrementally.

    Log-density problems keep ``A y, A z, G2 y, G2 z`` so a step costs one
    softmax over ``p`` rows, a column of ``A`` and a column of ``G2``.
    Other problems fall back to the problem's own partial oracles.
    """

    def __init__(self, problem: CompositeProblem, y: np.ndarray, z: np.ndarray):
        self.problem = problem
        A = problem.params.get("A")
        self.fast = isinstance(A, CsrMatrix)
        if self.fast:
            self.A = A
            self.G2 = problem.params["G2"]
            self.c = problem.params["c"]
            self.Ay, self.Az = A.matvec(y), A.matvec(z)
            self.Gy, self.Gz = self.G2 @ y, self.G2 @ z

    def partials(self, x: np.ndarray, tau: float, i: int) -> tuple[float, float]:
        if not self.fast:
            return (float(self.problem.h.partial(x, i)), float(self.problem.g.partial(x, i)))
        ax = tau * self.Az + (1.0 - tau) * self.Ay
        gx = tau * self.Gz + (1.0 - tau) * self.Gy
        self.Ax, self.Gx = ax, gx
        s = np.exp(ax - ax.max())
        s /= s.sum()
        idx, v = self.A.col(i)
        return float(v @ s[idx]) + self.c[i], float(gx[i])

    def update(self, i: int, ystep: float, z_scale: float, z_mix: float, zstep: float) -> None:
        """``y = x - ystep e_i`` and ``z = z_scale (z + z_mix x) - zstep e_i``."""
        if not self.fast:
            return
        idx, v = self.A.col(i)
        gcol = self.G2[:, i]
        self.Ay = self.Ax.copy()
        self.Ay[idx] -= ystep * v
        self.Gy = self.Gx - ystep * gcol
        self.Az = z_scale * (self.Az + z_mix * self.Ax)
        self.Az[idx] -= zstep * v
        self.Gz = z_scale * (self.Gz + z_mix * self.Gx) - zstep * gcol


def baseline_coord_fgm(problem: CompositeProblem, config: BenchConfig,
                       rng: np.random.Generator, tally: OracleTally,
                       trace: Optional[Trace] = None, x0=None,
                       check_every: Optional[int] = None) -> BaselineResult:
    """Accelerated coordinate descent on ``f`` with constants
    ``L_i = L_i(h) + beta_i(g)``, sampling proportional to ``sqrt(L_i)``.

    Needs coordinate oracles for both terms and ``mu > 0``. Each iteration is
    charged one ``h`` partial and one ``g`` unit. The objective is logged every
    ``check_every`` iterations (default ``n``).
    """
    if problem.h.partial is None or problem.h.coord_L is None:
        raise ConfigError("coord-fgm needs coordinate derivatives of h")
    if problem.g.mode is not GMode.COORDINATE:
        raise ConfigError("coord-fgm needs a coordinate-mode g oracle")
    mu = problem.mu if config.mu is None else config.mu
    if not mu > 0:
        raise ConfigError("coord-fgm needs mu > 0")
    n = problem.n
    Lc = np.asarray(problem.h.coord_L, dtype=float) + np.asarray(problem.g.beta, dtype=float)
    Lc = np.maximum(Lc, 1e-12 * Lc.max())
    sq = np.sqrt(Lc)
    S = float(sq.sum())
    sampler = DiscreteSampler(sq)
    p = sampler.probabilities
    tau = 2.0 / (1.0 + math.sqrt(4.0 * S * S / mu + 1.0))
    eta = 1.0 / (tau * S * S)
    shrink = 1.0 / (1.0 + eta * mu)
    zstep = eta / p * shrink
    max_iters = config.max_outer_budget or 100_000_000
    every = check_every or n

    y = np.zeros(n) if x0 is None else check_vector(x0, n, "x0").copy()
    z = y.copy()
    state = _CoordState(problem, y, z)
    with tally.phase("monitor"):
        f = value_f(problem, y, tally)
    if trace is not None:
        trace.add(0, 0, f, force=True)
    best_x, best_f = y, f
    if _target_hit(problem, f, config.eps):
        return BaselineResult(y, f, 0, "converged")
    k = 0
    try:
        while k < max_iters:
            _check_h_budget(tally, config.max_h_budget)
            with tally.phase("outer"):
                for i in sampler.sample_many(rng, every):
                    x = tau * z + (1.0 - tau) * y
                    dh, dg = state.partials(x, tau, i)
                    d = dh + dg
                    state.update(i, d / Lc[i], shrink, eta * mu, zstep[i] * d)
                    z = (z + (eta * mu) * x) * shrink
                    z[i] -= zstep[i] * d
                    x[i] -= d / Lc[i]
                    y = x
                tally.charge(g=every, h_partial=every)
            k += every
            with tally.phase("monitor"):
                f = value_f(problem, y, tally)
            if f < best_f:
                best_x, best_f = y, f
            if trace is not None:
                trace.add(k, 0, f, force=True)
            if _target_hit(problem, f, config.eps):
                return BaselineResult(y, f, k, "converged")
            if not math.isfinite(f):
                raise BudgetExhausted("iterates diverged")
    except BudgetExhausted as exc:
        return BaselineResult(best_x, best_f, k, "budget_exhausted", str(exc))
    status = "target_missed" if problem.f_star is not None else "converged"
    return BaselineResult(y, f, k, status, f"iteration budget {max_iters} reached")


def baseline_katyusha_full(problem: CompositeProblem, config: BenchConfig,
                           rng: np.random.Generator, tally: OracleTally,
                           trace: Optional[Trace] = None, x0=None) -> BaselineResult:
    """Katyusha on ``f = (1/m) sum_k (h + g_k)``.

    A stochastic step costs one ``grad h`` and one ``g`` unit; a snapshot costs
    one ``grad h`` and ``m`` units. ``L_hat = L_h + max_k L_{g_k}``. With
    ``mu = 0`` the momentum uses ``sigma = eps`` while the iterates carry no
    strong-convexity shrinkage.
    """
    g = problem.g
    if g.mode is not GMode.FINITE_SUM:
        raise ConfigError("katyusha-full needs a finite-sum g oracle")
    mu = problem.mu if config.mu is None else config.mu
    sigma = mu if mu > 0 else config.eps
    m = int(g.m)
    ep = 2 * m
    L_hat = problem.L_h + g.L_hat
    tau2 = 0.5
    tau1 = min(0.5, math.sqrt(ep * sigma / (3.0 * L_hat)))
    step = 1.0 / (3.0 * tau1 * L_hat)
    ystep = 1.0 / (3.0 * L_hat)
    weights = (1.0 + step * sigma) ** np.arange(ep)
    weights /= weights.sum()
    max_epochs = config.max_outer_budget or 1_000_000

    x_tilde = np.zeros(problem.n) if x0 is None else check_vector(x0, problem.n, "x0").copy()
    y, z = x_tilde.copy(), x_tilde.copy()
    with tally.phase("monitor"):
        f = value_f(problem, x_tilde, tally)
    if trace is not None:
        trace.add(0, 0, f, force=True)
    best_x, best_f = x_tilde, f
    if _target_hit(problem, f, config.eps):
        return BaselineResult(x_tilde, f, 0, "converged")
    k = 0
    try:
        while k < max_epochs:
            _check_h_budget(tally, config.max_h_budget)
            with tally.phase("outer"):
                gh_tilde = grad_h(problem, x_tilde, tally)
                grads = g.all_component_grads(x_tilde)
                tally.charge(g=m)
                full = gh_tilde + grads.mean(axis=0)
                acc = np.zeros_like(x_tilde)
                for j, c in enumerate(rng.integers(0, m, size=ep)):
                    x = tau1 * z + tau2 * x_tilde + (1.0 - tau1 - tau2) * y
                    gt = full + (problem.h.grad(x) - gh_tilde) + (g.component_grad(x, c) - grads[c])
                    z = (z - step * gt) / (1.0 + step * mu)
                    y = x - ystep * gt
                    acc += weights[j] * y
                tally.charge(h=ep, g=ep)
                x_tilde = acc
            k += 1
            with tally.phase("monitor"):
                f = value_f(problem, x_tilde, tally)
            if f < best_f:
                best_x, best_f = x_tilde, f
            if trace is not None:
                trace.add(k, 0, f)
            if _target_hit(problem, f, config.eps):
                return BaselineResult(x_tilde, f, k, "converged")
            if not math.isfinite(f):
                raise BudgetExhausted("iterates diverged")
    except BudgetExhausted as exc:
        return BaselineResult(best_x, best_f, k, "budget_exhausted", str(exc))
    status = "target_missed" if problem.f_star is not None else "converged"
    return BaselineResult(x_tilde, f, k, status, f"epoch budget {max_epochs} reached")


# --------------------------------------------------------------------------
# reference solutions


_REF_CACHE: dict = {}


def reference_solve(problem: CompositeProblem, tol: float, max_iters: int = 2_000_000,
                    x0=None) -> tuple[np.ndarray, float]:
    """High-accuracy unmetered solve by FGM with gradient-based restarts.

    Stops when the suboptimality estimate falls below ``tol``: ``|grad f|^2/(2 mu)``
    when ``mu > 0``, else ``|grad f| (|x - x0| + 1)``, or when ``f`` has not
    improved for 5000 iterations.
    """
    L_f = problem.L_f
    mu = problem.mu
    x = np.zeros(problem.n) if x0 is None else np.array(x0, dtype=float)
    start = x.copy()
    y = x.copy()
    t = 1.0
    best_x, best_f = x.copy(), problem.f_value(x)
    stall = 0
    for _ in range(max_iters):
        gy = problem.h.grad(y) + problem.g.grad(y)
        x_new = y - gy / L_f
        # restart when the momentum points uphill
        if float(gy @ (x_new - x)) > 0:
            t = 1.0
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        fx = problem.f_value(x)
        if fx < best_f - 1e-16 * max(1.0, abs(best_f)):
            best_x, best_f, stall = x.copy(), fx, 0
        else:
            stall += 1
        gx = problem.h.grad(x) + problem.g.grad(x)
        gn = float(np.linalg.norm(gx))
        est = gn * gn / (2.0 * mu) if mu > 0 else gn * (float(np.linalg.norm(x - start)) + 1.0)
        if est <= tol or stall >= 5000:
            break
    return best_x, best_f


# --------------------------------------------------------------------------
# runs


def _jsonable(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, (bool, str)) or v is None:
            out[k] = v
        elif isinstance(v, (int, np.integer)):
            out[k] = int(v)
        elif isinstance(v, (float, np.floating)):
            out[k] = float(v)
        elif isinstance(v, dict):
            out[k] = _jsonable(v)
    return out


def build_problem(config: BenchConfig) -> CompositeProblem:
    """Materialize the configured problem, with ``f_star`` attached (closed
    form or cached reference solve)."""
    kw = dict(config.problem_params)
    family = config.problem.split("-")[0]
    try:
        if config.csv is None:
            prob = make_preset(config.problem, config.seed, **kw)
        elif family == "svm":
            data = load_csv(config.csv, "svm", config.skip_header)
            spec = gen_svm(1, 1, config.seed)
            spec = dataclasses.replace(spec, points=data.values, labels=data.labels,
                                       name=config.problem,
                                       **{k: kw[k] for k in ("gamma_kernel", "lam", "gamma_s") if k in kw})
            prob = make_svm(spec)
            prob.params.update(preset=config.problem, csv=str(config.csv), suggested={})
        elif family == "logdensity":
            data = load_csv(config.csv, "matrix", config.skip_header)
            A = CsrMatrix.from_dense(data.values)
            G2 = gen_log_density(A.n_cols, 1, 1.0, config.seed).G2
            prob = make_log_density(LogDensitySpec(A, G2, name=config.problem,
                                                   params=dict(n=A.n_cols, p=A.n_rows)))
            prob.params.update(preset=config.problem, csv=str(config.csv),
                               suggested=dict(PRESETS[config.problem][1]))
        else:
            raise ConfigError(f"--csv is not supported for {config.problem!r}")
    except (ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    if prob.f_star is None:
        key = (config.problem, config.seed, config.csv, tuple(sorted(kw.items())), config.eps)
        if key not in _REF_CACHE:
            _REF_CACHE[key] = reference_solve(prob, config.eps / 100.0)
        x_ref, f_ref = _REF_CACHE[key]
        prob.f_star = f_ref
        prob.params["f_star_source"] = "reference"
        prob.params["R_ref"] = float(np.linalg.norm(x_ref))
    else:
        prob.params["f_star_source"] = "closed_form"
    return prob


def _check_compatible(method: str, problem: CompositeProblem) -> None:
    mode = problem.g.mode
    if method in _FRAMEWORK:
        solver = get_inner_solver(_FRAMEWORK[method])
        if not solver.accepts(problem.g):
            raise ConfigError(f"{method} needs a {solver.mode.value} g oracle but "
                              f"{problem.name} provides {mode.value}")
    elif method == "katyusha-full" and mode is not GMode.FINITE_SUM:
        raise ConfigError(f"katyusha-full needs a finite_sum g oracle but {problem.name} "
                          f"provides {mode.value}")
    elif method == "coord-fgm" and (mode is not GMode.COORDINATE or problem.h.partial is None):
        raise ConfigError(f"coord-fgm needs coordinate oracles for h and g; {problem.name} "
                          f"provides {mode.value}")


def _framework_L(config: BenchConfig, problem: CompositeProblem) -> float:
    if config.L is not None:
        return config.L
    factor = problem.params.get("suggested", {}).get("L_factor", 1.0)
    return factor * problem.L_h


def _exit_code(status: str) -> int:
    return EXIT_OK if status == "converged" else EXIT_BUDGET


def execute(config: BenchConfig, problem: CompositeProblem) -> RunReport:
    """Run the configured method on an already built problem (no files)."""
    _check_compatible(config.method, problem)
    tally = OracleTally()
    trace = Trace(tally, config.log_every, config.deterministic)
    rng = make_rng(config.seed)
    t0 = time.perf_counter()
    gmco_results = []
    stage = 0
    if config.method in _FRAMEWORK:
        L = _framework_L(config, problem)
        R = problem.params.get("R_ref") if problem.x_star is None else None
        scfg = SolverConfig(L=L, mu=config.mu, epsilon=config.eps, delta=config.delta,
                            R=R if R is None else max(R, 1e-12),
                            inner_stop_mode=config.inner_stop, seed=config.seed,
                            stop_at_target=True,
                            max_outer_iters=config.max_outer_budget or 1_000_000,
                            max_gmco_iters=config.max_gmco_budget or 10_000,
                            max_inner_units=config.max_inner_budget,
                            max_h_calls=config.max_h_budget)

        def cb(ev):
            if ev.f_value is not None:
                trace.add(ev.k, ev.stage, ev.f_value, ev.tally, force=ev.k == 0)

        try:
            res = solve(problem, scfg, _FRAMEWORK[config.method], tally=tally, callback=cb)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        x, f, iters, status, msg = res.x_hat, res.f_value, res.outer_iterations, res.status, res.message
        gmco_results = res.gmco_results
        stage = res.events[-1].stage if res.events else 0
    else:
        try:
            if config.method == "fgm":
                out = baseline_fgm(problem, config, tally, trace)
            elif config.method == "coord-fgm":
                out = baseline_coord_fgm(problem, config, rng, tally, trace)
            else:
                out = baseline_katyusha_full(problem, config, rng, tally, trace)
        except ConfigError:
            raise
        x, f, iters, status, msg = out.x, out.f_value, out.iterations, out.status, out.message
    wall = time.perf_counter() - t0
    if not trace.rows or trace.rows[-1][3:7] != (tally.h_grad_calls, tally.g_basic_units,
                                                 tally.f_value_evals, tally.criterion_checks):
        trace.add(iters, stage, f, force=True)
    gap = None if problem.f_star is None else f - problem.f_star
    params = _jsonable(problem.params)
    params.update(eps=config.eps, delta=config.delta, seed=config.seed,
                  inner_stop=config.inner_stop, L_h=problem.L_h, L_f=problem.L_f,
                  mu_problem=problem.mu, kappa_g=problem.kappa_g, g_mode=problem.g.mode.value)
    if config.method in _FRAMEWORK:
        params["L"] = _framework_L(config, problem)
    if config.mu is not None:
        params["mu"] = config.mu
    return RunReport(config.method, config.problem, params, f, problem.f_star,
                     problem.params.get("f_star_source"), gap, tally, wall, trace.rows,
                     status, _exit_code(status), msg, config.weight_full_grad, iters,
                     gmco_results)


def _out_root(config: BenchConfig) -> Path:
    root = config.out_dir or os.environ.get("OSPLIT_OUT_DIR") or "osplit-out"
    return Path(root)


def run(config: BenchConfig, write: bool = True, problem: Optional[CompositeProblem] = None) -> RunReport:
    """Validate, build the problem, run, and write ``<name>.csv`` and
    ``<name>.json`` under the output root.

    Raises :class:`ConfigError` for invalid configurations.
    """
    config.validate()
    problem = build_problem(config) if problem is None else problem
    report = execute(config, problem)
    if write:
        out = _out_root(config)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{config.run_name}.csv"
        json_path = out / f"{config.run_name}.json"
        write_trace_csv(report.rows, csv_path)
        with open(json_path, "w", newline="\n") as fh:
            json.dump(report.summary(), fh, indent=2, sort_keys=False)
            fh.write("\n")
        report.csv_path, report.json_path = str(csv_path), str(json_path)
    return report


SWEEP_HEADER = ("axis,value,method,problem,h_grad_calls,g_basic_units,h_partial_units,"
                "f_value_evals,criterion_checks,weighted_h,final_gap,exit_status,wall_time_s")


def _apply_axis(config: BenchConfig, axis: str, value) -> BenchConfig:
    cfg = dataclasses.replace(config, problem_params=dict(config.problem_params))
    if axis == "eps":
        cfg.eps = float(value)
    elif axis == "L_h-scale":
        cfg.problem_params["L_h_scale"] = float(value)
    elif axis == "L_g-scale":
        cfg.problem_params["L_g_scale"] = float(value)
    elif axis == "mu":
        if config.problem.startswith("quad"):
            cfg.problem_params["mu"] = float(value)
        else:
            cfg.mu = float(value)
    elif axis in ("n", "m"):
        cfg.problem_params[axis] = int(value)
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    cfg.name = f"{config.run_name}_{axis}={value}"
    return cfg


def sweep(config: BenchConfig, axis: str, values, write: bool = True) -> list[dict]:
    """One run per axis value (sorted ascending); a failing sub-run is
    recorded in its row and the sweep continues. Writes
    ``<name>_sweep_<axis>.csv`` when ``write`` is set."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    config.validate()
    rows = []
    for v in sorted(values, key=float):
        cfg = _apply_axis(config, axis, v)
        row = {"axis": axis, "value": v, "method": cfg.method, "problem": cfg.problem}
        try:
            rep = run(cfg, write=write)
            t = rep.tally
            row.update(h_grad_calls=t.h_grad_calls, g_basic_units=t.g_basic_units,
                       h_partial_units=t.h_partial_units, f_value_evals=t.f_value_evals,
                       criterion_checks=t.criterion_checks, weighted_h=rep.weighted_h,
                       final_gap=rep.final_gap, exit_status=rep.status,
                       wall_time_s=0.0 if cfg.deterministic else rep.wall_time_s, report=rep)
        except Exception as exc:  # recorded in-row, sweep continues
            row.update(exit_status=f"error: {exc}")
        rows.append(row)
    if write:
        out = _out_root(config)
        out.mkdir(parents=True, exist_ok=True)
        lines = [SWEEP_HEADER]
        for r in rows:
            cells = []
            for col in SWEEP_HEADER.split(","):
                v = r.get(col)
                if v is None:
                    cells.append("")
                elif isinstance(v, str):
                    cells.append(v.replace(",", ";"))
                else:
                    cells.append(format_number(v))
            lines.append(",".join(cells))
        with open(out / f"{config.run_name}_sweep_{axis}.csv", "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    return rows
