"""Inner solvers for ``phi(v) = <beta, v> + (alpha/2)|v|^2 + g(v)``.

Three methods, one per basic-oracle mode of ``g``:

* :func:`solve_apg` -- accelerated proximal gradient, one full ``grad g`` per
  iteration, the quadratic part handled by its closed-form prox;
* :func:`solve_acdm` -- accelerated randomized coordinate descent on the whole
  of ``phi`` with non-uniform sampling, one partial derivative per iteration;
* :func:`solve_katyusha` -- Katyusha (variance reduction with negative
  momentum) for finite-sum ``g``.

Each takes a stopping rule: a fixed iteration count, or a certified gap that
is checked periodically with :func:`gap_certificate`. Certificate work is
charged to the tally like any other oracle call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np

from .core import GMode, GTerm, OracleTally, DiscreteSampler, check_vector

__all__ = [
    "InnerProblem",
    "FixedIters",
    "CertifiedGap",
    "StopRule",
    "InnerReport",
    "InnerBudgetExceeded",
    "prox_quadratic",
    "gap_certificate",
    "solve_apg",
    "solve_acdm",
    "solve_katyusha",
    "katyusha_estimator",
    "InnerSolver",
    "INNER_SOLVERS",
    "get_inner_solver",
]

DEFAULT_MAX_UNITS = 20_000_000


@dataclass
class InnerProblem:
    beta: np.ndarray
    alpha: float
    g: GTerm

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.beta.ndim != 1:
            raise ValueError("beta must be a vector")

    @property
    def n(self) -> int:
        return self.beta.shape[0]

    def value(self, v: np.ndarray) -> float:
        return float(self.beta @ v + 0.5 * self.alpha * (v @ v) + self.g.value(v))

    def grad(self, v: np.ndarray) -> np.ndarray:
        return self.g.grad(v) + self.beta + self.alpha * v


@dataclass(frozen=True)
class FixedIters:
    n_iters: int

    def __post_init__(self):
        if self.n_iters < 0:
            raise ValueError("iteration count must be nonnegative")


@dataclass(frozen=True)
class CertifiedGap:
    """Stop once the certified bound on ``phi(v) - phi*`` is at most ``eps``.

    ``check_every`` overrides the solver's default certificate period;
    ``max_units`` caps the basic ``g`` units of this solve.
    """

    eps: float
    check_every: Optional[int] = None
    max_units: Optional[int] = None
    c_cert: float = 1.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")


StopRule = Union[FixedIters, CertifiedGap]


@dataclass
class InnerReport:
    v_hat: np.ndarray
    iterations: int
    g_units_used: int
    certified_gap_bound: Optional[float] = None


class InnerBudgetExceeded(RuntimeError):
    def __init__(self, message: str, report: InnerReport):
        super().__init__(message)
        self.report = report


def prox_quadratic(u, t: float, beta, alpha: float) -> np.ndarray:
    """``argmin_v <beta,v> + (alpha/2)|v|^2 + |v-u|^2/(2t)``.

    ``t = inf`` is allowed and returns the minimizer of the quadratic alone.
    """
    if not t > 0:
        raise ValueError("prox step must be positive")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    u = np.asarray(u, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if math.isinf(t):
        if alpha <= 0:
            raise ValueError("infinite step needs alpha > 0")
        return -beta / alpha
    return (u - t * beta) / (1.0 + t * alpha)


def _bound_from_grad(phi: InnerProblem, v: np.ndarray, grad_g: np.ndarray,
                     c_cert: float) -> float:
    r = grad_g + phi.beta + phi.alpha * v
    return c_cert * float(r @ r) / (2.0 * phi.alpha)


def gap_certificate(phi: InnerProblem, v, tally: OracleTally, c_cert: float = 1.0) -> float:
    """Upper bound on ``phi(v) - phi*``; costs one full ``grad g``.

    With the gradient mapping ``G(v) = L_g (v - prox(v - grad g(v)/L_g))`` one
    has ``grad phi(v) = (1 + alpha/L_g) G(v)``, and alpha-strong convexity
    gives ``phi(v) - phi* <= |grad phi(v)|^2 / (2 alpha)``. The bound is
    computed in that form, which stays valid for any ``L_g`` including 0.
    """
    v = check_vector(v, phi.n, "v")
    gg = phi.g.grad(v)
    tally.charge(g=phi.g.kappa)
    return _bound_from_grad(phi, v, gg, c_cert)


def _start(phi: InnerProblem, start) -> np.ndarray:
    if start is None:
        return np.zeros(phi.n)
    return check_vector(start, phi.n, "start").copy()


class _Budget:
    """Tracks g units of one solve against the tally and an optional cap."""

    def __init__(self, tally: OracleTally, stop: StopRule):
        self.tally = tally
        self.start_units = tally.g_basic_units
        cap = stop.max_units if isinstance(stop, CertifiedGap) else None
        self.cap = DEFAULT_MAX_UNITS if cap is None else cap

    @property
    def used(self) -> int:
        return self.tally.g_basic_units - self.start_units

    def exceeded(self) -> bool:
        return self.used > self.cap


def _fail(name: str, best: np.ndarray, iters: int, budget: _Budget,
          best_bound: Optional[float], eps: float):
    rep = InnerReport(best, iters, budget.used, best_bound)
    raise InnerBudgetExceeded(
        f"{name}: {budget.used} g units spent without certifying gap <= {eps:g} "
        f"(best bound {best_bound})", rep)


# --------------------------------------------------------------------------
# accelerated proximal gradient


def solve_apg(phi: InnerProblem, stop: StopRule, rng=None, tally: Optional[OracleTally] = None,
              start=None) -> InnerReport:
    """Accelerated proximal gradient with constant strongly-convex momentum.

    Smooth part ``g`` with step ``1/L_g``; the linear-plus-quadratic part goes
    through :func:`prox_quadratic`. Momentum ``(1 - sqrt q)/(1 + sqrt q)`` with
    ``q = alpha / (L_g + alpha)``. Certificates every 10 iterations by default.
    """
    tally = tally if tally is not None else OracleTally()
    g, kappa = phi.g, phi.g.kappa
    v = _start(phi, start)
    budget = _Budget(tally, stop)
    L_g = float(g.L)
    t = math.inf if L_g <= 0 else 1.0 / L_g
    q = phi.alpha / (L_g + phi.alpha)
    mom = (1.0 - math.sqrt(q)) / (1.0 + math.sqrt(q))
    y = v.copy()

    if isinstance(stop, FixedIters):
        for _ in range(stop.n_iters):
            v_new = prox_quadratic(y - t * g.grad(y) if L_g > 0 else y, t, phi.beta, phi.alpha)
            y = v_new + mom * (v_new - v)
            v = v_new
        tally.charge(g=kappa * stop.n_iters)
        return InnerReport(v, stop.n_iters, budget.used)

    every = stop.check_every or 10
    best, best_bound = v.copy(), math.inf
    k = 0
    while True:
        for _ in range(every):
            v_new = prox_quadratic(y - t * g.grad(y) if L_g > 0 else y, t, phi.beta, phi.alpha)
            y = v_new + mom * (v_new - v)
            v = v_new
        k += every
        tally.charge(g=kappa * every)
        bound = gap_certificate(phi, v, tally, stop.c_cert)
        if bound < best_bound:
            best, best_bound = v.copy(), bound
        if bound <= stop.eps:
            return InnerReport(v, k, budget.used, bound)
        if budget.exceeded() or not np.all(np.isfinite(v)):
            _fail("apg", best, k, budget, best_bound, stop.eps)


# --------------------------------------------------------------------------
# accelerated coordinate descent


def _coordinate_constants(phi: InnerProblem) -> np.ndarray:
    b = np.asarray(phi.g.beta, dtype=float)
    top = float(b.max()) if b.size else 0.0
    floor = 1e-12 * top
    return np.maximum(b, floor) + phi.alpha


def solve_acdm(phi: InnerProblem, stop: StopRule, rng: np.random.Generator,
               tally: Optional[OracleTally] = None, start=None) -> InnerReport:
    """Accelerated random coordinate descent on the whole of ``phi``.

    Coordinate constants ``beta_i + alpha``, sampling proportional to their
    square roots, strong convexity ``alpha``. Only ``dg/dv_i`` is metered; the
    linear and quadratic parts are differentiated in closed form. Certificates
    every ``ceil(n/4)`` iterations by default.
    """
    g = phi.g
    if g.mode is not GMode.COORDINATE:
        raise ValueError("solve_acdm needs a coordinate-mode g oracle")
    tally = tally if tally is not None else OracleTally()
    n, alpha, lin = phi.n, phi.alpha, phi.beta
    Lc = _coordinate_constants(phi)
    sq = np.sqrt(Lc)
    S = float(sq.sum())
    sampler = DiscreteSampler(sq)
    p = sampler.probabilities
    tau = 2.0 / (1.0 + math.sqrt(4.0 * S * S / alpha + 1.0))
    eta = 1.0 / (tau * S * S)
    shrink = 1.0 / (1.0 + eta * alpha)
    zstep = eta / p * shrink
    ystep = 1.0 / Lc
    partial = g.partial
    budget = _Budget(tally, stop)

    y = _start(phi, start)
    z = y.copy()

    def run(count: int):
        nonlocal y, z
        for i in sampler.sample_many(rng, count):
            x = tau * z
            x += (1.0 - tau) * y
            d = lin[i] + alpha * x[i] + partial(x, i)
            z = (z + (eta * alpha) * x) * shrink
            z[i] -= zstep[i] * d
            x[i] -= ystep[i] * d
            y = x
        tally.charge(g=count)

    if isinstance(stop, FixedIters):
        run(stop.n_iters)
        return InnerReport(y.copy(), stop.n_iters, budget.used)

    every = stop.check_every or max(1, math.ceil(n / 4))
    best, best_bound = y.copy(), math.inf
    k = 0
    while True:
        run(every)
        k += every
        bound = gap_certificate(phi, y, tally, stop.c_cert)
        if bound < best_bound:
            best, best_bound = y.copy(), bound
        if bound <= stop.eps:
            return InnerReport(y.copy(), k, budget.used, bound)
        if budget.exceeded() or not np.all(np.isfinite(y)):
            _fail("acdm", best, k, budget, best_bound, stop.eps)


# --------------------------------------------------------------------------
# Katyusha


def katyusha_estimator(g: GTerm, x: np.ndarray, snapshot_grads: np.ndarray,
                       snapshot_mean: np.ndarray, k: int) -> np.ndarray:
    """Variance-reduced estimate of ``grad g(x)`` from component ``k``."""
    return snapshot_mean + g.component_grad(x, k) - snapshot_grads[k]


def solve_katyusha(phi: InnerProblem, stop: StopRule, rng: np.random.Generator,
                   tally: Optional[OracleTally] = None, start=None) -> InnerReport:
    """Katyusha for finite-sum ``g`` with the quadratic part as prox term.

    One epoch is a snapshot (all ``m`` component gradients, ``m`` units) and
    ``2m`` stochastic steps of one unit each. ``tau2 = 1/2``,
    ``tau1 = min(1/2, sqrt(2 m alpha / (3 L_hat)))``, step ``1/(3 tau1 L_hat)``.
    The snapshot gradient doubles as the certificate, so checks are free.
    Iterations are counted in epochs.
    """
    g = phi.g
    if g.mode is not GMode.FINITE_SUM:
        raise ValueError("solve_katyusha needs a finite-sum g oracle")
    tally = tally if tally is not None else OracleTally()
    m, alpha, lin = int(g.m), phi.alpha, phi.beta
    ep = 2 * m
    L_hat = max(g.L_hat, 1e-12 * alpha)
    tau2 = 0.5
    tau1 = min(0.5, math.sqrt(ep * alpha / (3.0 * L_hat)))
    step = 1.0 / (3.0 * tau1 * L_hat)
    ystep = 1.0 / (3.0 * L_hat)
    growth = 1.0 + step * alpha
    weights = growth ** np.arange(ep)
    weights /= weights.sum()
    budget = _Budget(tally, stop)
    cgrad = g.component_grad

    x_tilde = _start(phi, start)
    y = x_tilde.copy()
    z = x_tilde.copy()

    def snapshot():
        grads = g.all_component_grads(x_tilde)
        tally.charge(g=m)
        return grads, grads.mean(axis=0)

    def epoch(grads, mean):
        nonlocal y, z, x_tilde
        acc = np.zeros_like(x_tilde)
        ks = rng.integers(0, m, size=ep)
        for j in range(ep):
            k = ks[j]
            x = tau1 * z + tau2 * x_tilde + (1.0 - tau1 - tau2) * y
            gt = mean + cgrad(x, k) - grads[k]
            z = (z - step * gt - step * lin) / (1.0 + step * alpha)
            y = (x - ystep * gt - ystep * lin) / (1.0 + ystep * alpha)
            acc += weights[j] * y
        tally.charge(g=ep)
        x_tilde = acc

    if isinstance(stop, FixedIters):
        for _ in range(stop.n_iters):
            epoch(*snapshot())
        return InnerReport(x_tilde.copy(), stop.n_iters, budget.used)

    best, best_bound = x_tilde.copy(), math.inf
    epochs = 0
    while True:
        grads, mean = snapshot()
        bound = _bound_from_grad(phi, x_tilde, mean, stop.c_cert)
        if bound < best_bound:
            best, best_bound = x_tilde.copy(), bound
        if bound <= stop.eps:
            return InnerReport(x_tilde.copy(), epochs, budget.used, bound)
        if budget.exceeded() or not np.all(np.isfinite(x_tilde)):
            _fail("katyusha", best, epochs, budget, best_bound, stop.eps)
        epoch(grads, mean)
        epochs += 1


# --------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class InnerSolver:
    """A named inner method with its complexity coefficient ``tau_g`` and the
    conversion from a basic-oracle budget to its own iteration unit."""

    name: str
    mode: Optional[GMode]
    solve: Callable[..., InnerReport]
    tau_g: Callable[[GTerm], float]
    iters_for_units: Callable[[int, GTerm], int]

    def accepts(self, g: GTerm) -> bool:
        return self.mode is None or g.mode is self.mode


INNER_SOLVERS = {
    "apg": InnerSolver("apg", None, solve_apg,
                       lambda g: math.sqrt(g.L),
                       lambda units, g: max(1, units)),
    "acdm": InnerSolver("acdm", GMode.COORDINATE, solve_acdm,
                        lambda g: float(np.sum(np.sqrt(g.beta))),
                        lambda units, g: max(1, units)),
    "katyusha": InnerSolver("katyusha", GMode.FINITE_SUM, solve_katyusha,
                            lambda g: math.sqrt(g.m * g.L_hat),
                            lambda units, g: max(1, math.ceil(units / (2 * g.m)))),
}


def get_inner_solver(name: str) -> InnerSolver:
    try:
        return INNER_SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown inner solver {name!r}; choose from {sorted(INNER_SOLVERS)}")
