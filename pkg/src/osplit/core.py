"""Numerical primitives, the composite problem abstraction and oracle metering.

A problem is ``f = h + g`` where ``h`` is reached through a full-gradient
oracle and ``g`` through a *basic* oracle whose unit is either the full
gradient, one partial derivative or one finite-sum component gradient.
Every oracle function here takes an :class:`OracleTally` and charges it.
"""

from __future__ import annotations

import enum
import math
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from typing import Callable, Iterator, Optional

import numpy as np
import scipy.sparse as sp

__all__ = [
    "OracleError",
    "Counts",
    "OracleTally",
    "make_rng",
    "DiscreteSampler",
    "sample_discrete",
    "CsrMatrix",
    "SmoothTerm",
    "GMode",
    "GTerm",
    "CompositeProblem",
    "check_vector",
    "grad_h",
    "g_basic",
    "grad_g_full",
    "grad_f",
    "value_f",
]


class OracleError(ValueError):
    """Bad input to, or non-finite output from, an oracle."""


def check_vector(x: np.ndarray, n: int, what: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != n:
        raise OracleError(f"{what} has shape {x.shape}, expected ({n},)")
    return x


def _check_finite(v: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        bad = int(np.flatnonzero(~np.isfinite(np.atleast_1d(v)))[0])
        raise OracleError(f"{what} is not finite at index {bad}")
    return v


# --------------------------------------------------------------------------
# metering


@dataclass
class Counts:
    """Plain oracle counters. ``h_partial_units`` is only used by baselines
    that read ``h`` one coordinate at a time."""

    h_grad_calls: int = 0
    g_basic_units: int = 0
    f_value_evals: int = 0
    criterion_checks: int = 0
    h_partial_units: int = 0

    def copy(self) -> "Counts":
        return Counts(**self.as_dict())

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(**{k: v + getattr(other, k) for k, v in self.as_dict().items()})

    def __sub__(self, other: "Counts") -> "Counts":
        return Counts(**{k: v - getattr(other, k) for k, v in self.as_dict().items()})


class OracleTally:
    """Monotone oracle counters with a per-phase breakdown.

    All charges go both to :attr:`total` and to the counters of the phase that
    is active at the time (see :meth:`phase`). The sum over phases always
    equals the total.
    """

    def __init__(self) -> None:
        self.total = Counts()
        self.by_phase: dict[str, Counts] = {}
        self._phase = "other"

    @contextmanager
    def phase(self, name: str) -> Iterator["OracleTally"]:
        previous, self._phase = self._phase, name
        try:
            yield self
        finally:
            self._phase = previous

    @property
    def current_phase(self) -> str:
        return self._phase

    def charge(self, h: int = 0, g: int = 0, f: int = 0, checks: int = 0,
               h_partial: int = 0) -> None:
        if min(h, g, f, checks, h_partial) < 0:
            raise ValueError("oracle charges must be nonnegative")
        for counts in (self.total, self.by_phase.setdefault(self._phase, Counts())):
            counts.h_grad_calls += h
            counts.g_basic_units += g
            counts.f_value_evals += f
            counts.criterion_checks += checks
            counts.h_partial_units += h_partial

    def snapshot(self) -> Counts:
        return self.total.copy()

    @property
    def h_grad_calls(self) -> int:
        return self.total.h_grad_calls

    @property
    def g_basic_units(self) -> int:
        return self.total.g_basic_units

    @property
    def f_value_evals(self) -> int:
        return self.total.f_value_evals

    @property
    def criterion_checks(self) -> int:
        return self.total.criterion_checks

    @property
    def h_partial_units(self) -> int:
        return self.total.h_partial_units

    def phase_sum(self) -> Counts:
        out = Counts()
        for c in self.by_phase.values():
            out = out + c
        return out


# --------------------------------------------------------------------------
# randomness


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox 4x64) generator; same seed, same stream on every
    platform."""
    return np.random.Generator(np.random.Philox(int(seed)))


class DiscreteSampler:
    """Inverse-CDF sampling over a fixed weight vector."""

    def __init__(self, weights) -> None:
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights sum to zero")
        self.weights = w
        self.probabilities = w / total
        cdf = np.cumsum(w) / total
        cdf[-1] = 1.0
        self._cdf = cdf

    def sample(self, rng: np.random.Generator) -> int:
        return int(np.searchsorted(self._cdf, rng.random(), side="right"))

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = np.searchsorted(self._cdf, rng.random(size), side="right")
        # guards against a trailing run of zero weights
        return np.minimum(idx, len(self._cdf) - 1)


def sample_discrete(rng: np.random.Generator, weights) -> int:
    """Draw index ``i`` with probability ``w[i] / sum(w)``."""
    return DiscreteSampler(weights).sample(rng)


# --------------------------------------------------------------------------
# sparse storage


class CsrMatrix:
    """CSR matrix with a cached CSC view for column access.

    Backed by :mod:`scipy.sparse`; the wrapper pins down the invariants
    (sorted, duplicate-free column indices) and the text format.
    """

    def __init__(self, n_rows: int, n_cols: int, row_offsets, col_indices, values):
        row_offsets = np.asarray(row_offsets, dtype=np.int64)
        col_indices = np.asarray(col_indices, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        if row_offsets.shape != (n_rows + 1,) or row_offsets[0] != 0:
            raise ValueError("row_offsets must have length n_rows+1 and start at 0")
        if np.any(np.diff(row_offsets) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        nnz = int(row_offsets[-1])
        if col_indices.shape != (nnz,) or values.shape != (nnz,):
            raise ValueError("col_indices/values length must equal nnz")
        if nnz and (col_indices.min() < 0 or col_indices.max() >= n_cols):
            raise ValueError("column index out of range")
        for r in range(n_rows):
            seg = col_indices[row_offsets[r]:row_offsets[r + 1]]
            if seg.size > 1 and np.any(np.diff(seg) <= 0):
                raise ValueError(f"column indices of row {r} are not strictly increasing")
        self._csr = sp.csr_matrix((values, col_indices, row_offsets), shape=(n_rows, n_cols))
        self._csc: Optional[sp.csc_matrix] = None

    @classmethod
    def from_dense(cls, a) -> "CsrMatrix":
        a = np.asarray(a, dtype=float)
        s = sp.csr_matrix(a)
        s.sort_indices()
        return cls(a.shape[0], a.shape[1], s.indptr, s.indices, s.data)

    @classmethod
    def from_scipy(cls, s) -> "CsrMatrix":
        s = sp.csr_matrix(s)
        s.sum_duplicates()
        s.sort_indices()
        return cls(s.shape[0], s.shape[1], s.indptr, s.indices, s.data)

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def n_rows(self) -> int:
        return self._csr.shape[0]

    @property
    def n_cols(self) -> int:
        return self._csr.shape[1]

    @property
    def nnz(self) -> int:
        return int(self._csr.indptr[-1])

    @property
    def row_offsets(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def values(self) -> np.ndarray:
        return self._csr.data

    @property
    def scipy(self) -> sp.csr_matrix:
        return self._csr

    @property
    def csc(self) -> sp.csc_matrix:
        if self._csc is None:
            self._csc = self._csr.tocsc()
            self._csc.sort_indices()
        return self._csc

    def matvec(self, x) -> np.ndarray:
        return self._csr @ np.asarray(x, dtype=float)

    def rmatvec(self, y) -> np.ndarray:
        return self._csr.T @ np.asarray(y, dtype=float)

    def row(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self._csr.indptr[k], self._csr.indptr[k + 1]
        return self._csr.indices[lo:hi], self._csr.data[lo:hi]

    def col(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        c = self.csc
        lo, hi = c.indptr[j], c.indptr[j + 1]
        return c.indices[lo:hi], c.data[lo:hi]

    def column_norms_sq(self) -> np.ndarray:
        return np.asarray(self._csr.multiply(self._csr).sum(axis=0)).ravel()

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def __eq__(self, other) -> bool:
        if not isinstance(other, CsrMatrix):
            return NotImplemented
        return (self.shape == other.shape
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices)
                and np.array_equal(self.values, other.values))

    def to_text(self) -> str:
        """``csr n_rows n_cols nnz`` header, then offsets, indices, values."""
        lines = [
            f"csr {self.n_rows} {self.n_cols} {self.nnz}",
            " ".join(str(int(v)) for v in self.row_offsets),
            " ".join(str(int(v)) for v in self.col_indices),
            " ".join(repr(float(v)) for v in self.values),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CsrMatrix":
        lines = text.splitlines()
        while len(lines) < 4:
            lines.append("")
        head = lines[0].split()
        if len(head) != 4 or head[0] != "csr":
            raise ValueError("expected header 'csr n_rows n_cols nnz'")
        n_rows, n_cols, nnz = (int(t) for t in head[1:])
        offsets = [int(t) for t in lines[1].split()]
        cols = [int(t) for t in lines[2].split()]
        vals = [float(t) for t in lines[3].split()]
        if len(cols) != nnz or len(vals) != nnz:
            raise ValueError(f"header declares nnz={nnz}, body has {len(cols)}/{len(vals)}")
        return cls(n_rows, n_cols, offsets, cols, vals)

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "CsrMatrix":
        with open(path) as fh:
            return cls.from_text(fh.read())


# --------------------------------------------------------------------------
# problem abstraction


@dataclass(frozen=True)
class SmoothTerm:
    """The ``h`` part. ``partial``/``coord_L`` are optional and only used by
    coordinate baselines."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    L: float
    partial: Optional[Callable[[np.ndarray, int], float]] = None
    coord_L: Optional[np.ndarray] = None


class GMode(enum.Enum):
    FULL = "full"
    COORDINATE = "coordinate"
    FINITE_SUM = "finite_sum"


@dataclass(frozen=True)
class GTerm:
    """The ``g`` part with a mode-tagged basic oracle.

    ``grad`` always returns the full gradient; how many basic units that costs
    is decided by the mode (``kappa``). ``L`` is the Lipschitz constant of the
    full gradient in every mode.

    Coordinate mode needs ``partial`` and ``beta`` (coordinate constants).
    Finite-sum mode needs ``m``, ``component_grad`` and ``component_L``;
    ``g = (1/m) sum_k g_k``. ``component_grads`` optionally returns all
    component gradients stacked as an ``(m, n)`` array.
    """

    mode: GMode
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    L: float
    beta: Optional[np.ndarray] = None
    partial: Optional[Callable[[np.ndarray, int], float]] = None
    m: Optional[int] = None
    component_grad: Optional[Callable[[np.ndarray, int], np.ndarray]] = None
    component_L: Optional[np.ndarray] = None
    component_grads: Optional[Callable[[np.ndarray], np.ndarray]] = None
    n: Optional[int] = None

    def __post_init__(self):
        if self.mode is GMode.COORDINATE:
            if self.beta is None or self.partial is None:
                raise ValueError("coordinate mode needs beta and partial")
            if np.any(np.asarray(self.beta) <= 0):
                raise ValueError("coordinate Lipschitz constants must be positive")
        if self.mode is GMode.FINITE_SUM:
            if not self.m or self.m < 1 or self.component_grad is None or self.component_L is None:
                raise ValueError("finite-sum mode needs m >= 1, component_grad, component_L")

    @property
    def kappa(self) -> int:
        if self.mode is GMode.FULL:
            return 1
        if self.mode is GMode.COORDINATE:
            return len(self.beta)
        return int(self.m)

    @property
    def L_hat(self) -> float:
        """Largest component constant (finite-sum mode)."""
        return float(np.max(self.component_L))

    def all_component_grads(self, x: np.ndarray) -> np.ndarray:
        if self.component_grads is not None:
            return self.component_grads(x)
        return np.stack([self.component_grad(x, k) for k in range(self.m)])


def zero_g(n: int, mode: GMode = GMode.FULL, m: int = 1) -> GTerm:
    """``g = 0`` in the requested mode; coordinate constants are floored at 1."""
    zeros = lambda x: np.zeros(n)
    if mode is GMode.FULL:
        return GTerm(GMode.FULL, lambda x: 0.0, zeros, 0.0, n=n)
    if mode is GMode.COORDINATE:
        return GTerm(GMode.COORDINATE, lambda x: 0.0, zeros, 0.0, beta=np.ones(n),
                     partial=lambda x, i: 0.0, n=n)
    return GTerm(GMode.FINITE_SUM, lambda x: 0.0, zeros, 0.0, m=m,
                 component_grad=lambda x, k: np.zeros(n), component_L=np.zeros(m),
                 component_grads=lambda x: np.zeros((m, n)), n=n)


__all__.append("zero_g")


@dataclass
class CompositeProblem:
    """``f = h + g`` on R^n with constants ``mu`` and ``L_f``.

    ``x_star``/``f_star`` are attached when a closed-form or reference
    solution is known; solvers never read them except for early stopping.
    """

    n: int
    h: SmoothTerm
    g: GTerm
    mu: float
    L_f: float
    name: str = "problem"
    x_star: Optional[np.ndarray] = None
    f_star: Optional[float] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be at least 1")
        if not self.h.L > 0:
            raise ValueError("L_h must be positive")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.L_f < self.h.L * (1 - 1e-12):
            raise ValueError("L_f must be at least L_h")
        if self.g.mode is GMode.COORDINATE and len(self.g.beta) != self.n:
            raise ValueError("need one coordinate constant per coordinate")

    @property
    def L_h(self) -> float:
        return self.h.L

    @property
    def kappa_g(self) -> int:
        return self.g.kappa

    def f_value(self, x: np.ndarray) -> float:
        """Unmetered objective value (for tests and reference solves)."""
        return float(self.h.value(x) + self.g.value(x))


# --------------------------------------------------------------------------
# metered oracles


def grad_h(problem: CompositeProblem, x, tally: OracleTally) -> np.ndarray:
    x = check_vector(x, problem.n)
    out = _check_finite(np.asarray(problem.h.grad(x), dtype=float), "grad h")
    tally.charge(h=1)
    return out


def g_basic(problem: CompositeProblem, x, index: Optional[int], tally: OracleTally):
    """One basic ``g`` oracle call.

    Full mode returns the gradient (``index`` must be ``None``); coordinate
    mode returns one partial derivative; finite-sum mode returns one
    component gradient.
    """
    x = check_vector(x, problem.n)
    g = problem.g
    if g.mode is GMode.FULL:
        if index is not None:
            raise OracleError("index given for a full-gradient g oracle")
        out = _check_finite(np.asarray(g.grad(x), dtype=float), "grad g")
    else:
        if index is None:
            raise OracleError(f"{g.mode.value} g oracle needs an index")
        limit = problem.n if g.mode is GMode.COORDINATE else g.m
        if not 0 <= index < limit:
            raise OracleError(f"index {index} out of range [0, {limit})")
        if g.mode is GMode.COORDINATE:
            out = float(g.partial(x, int(index)))
            if not math.isfinite(out):
                raise OracleError(f"partial derivative {index} of g is not finite")
        else:
            out = _check_finite(np.asarray(g.component_grad(x, int(index)), dtype=float),
                                f"grad g_{index}")
    tally.charge(g=1)
    return out


def grad_g_full(problem: CompositeProblem, x, tally: OracleTally) -> np.ndarray:
    """Full gradient of ``g``; costs ``kappa_g`` basic units."""
    x = check_vector(x, problem.n)
    out = _check_finite(np.asarray(problem.g.grad(x), dtype=float), "grad g")
    tally.charge(g=problem.kappa_g)
    return out


def grad_f(problem: CompositeProblem, x, tally: OracleTally) -> np.ndarray:
    return grad_h(problem, x, tally) + grad_g_full(problem, x, tally)


def value_f(problem: CompositeProblem, x, tally: OracleTally) -> float:
    """Objective value; metered in its own counter only."""
    x = check_vector(x, problem.n)
    v = problem.f_value(x)
    if not math.isfinite(v):
        raise OracleError("f value is not finite")
    tally.charge(f=1)
    return v
