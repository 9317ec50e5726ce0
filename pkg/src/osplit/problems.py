"""Concrete composite problems: quadratics with closed-form solutions, a
smoothed-hinge kernel SVM and a softmax log-density with a Gaussian prior.

Every builder returns a :class:`~osplit.core.CompositeProblem`. Generators
take explicit seeds; named presets are reachable through :func:`make_preset`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp, softmax

from .core import (CompositeProblem, CsrMatrix, GMode, GTerm, SmoothTerm, make_rng)

__all__ = [
    "QuadraticSpec",
    "KernelSvmSpec",
    "LogDensitySpec",
    "make_quadratic",
    "quadratic_family",
    "smoothed_hinge",
    "rbf_kernel",
    "power_max_eig",
    "logsumexp_grad",
    "gen_log_density",
    "make_log_density",
    "gen_svm",
    "make_svm",
    "load_csv",
    "CsvData",
    "PRESETS",
    "make_preset",
]

_PSD_TOL = 1e-10


def _sym_eigs(H: np.ndarray, what: str) -> np.ndarray:
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"{what} must be square")
    if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
        raise ValueError(f"{what} must be symmetric")
    ev = np.linalg.eigvalsh(H)
    if ev[0] < -_PSD_TOL * max(1.0, abs(ev[-1])):
        raise ValueError(f"{what} is not positive semidefinite (min eigenvalue {ev[0]:.3e})")
    return ev


# --------------------------------------------------------------------------
# quadratics


@dataclass
class QuadraticSpec:
    """``h(x) = x'H_h x/2 - b'x`` and ``g(x) = x'H_g x/2``.

    ``mode`` selects the ``g`` oracle. In finite-sum mode ``components`` is
    either an ``(m, n, n)`` stack of matrices ``H_k`` or an ``(m, n)`` array of
    rows ``a_k`` (meaning ``H_k = a_k a_k'``); either way
    ``H_g = mean_k H_k``. Without components the eigenpairs of ``H_g`` are dealt
    round-robin into ``m`` groups.
    """

    H_h: np.ndarray
    H_g: np.ndarray
    b: np.ndarray
    mode: str = "full"
    m: Optional[int] = None
    components: Optional[np.ndarray] = None
    name: str = "quadratic"
    params: dict = field(default_factory=dict)


def _split_components(H_g: np.ndarray, m: int) -> np.ndarray:
    s, Q = np.linalg.eigh(H_g)
    n = len(s)
    if m > n:
        raise ValueError("round-robin split needs m <= n")
    comps = np.zeros((m, n, n))
    for j in range(n):
        q = Q[:, j]
        comps[j % m] += m * max(s[j], 0.0) * np.outer(q, q)
    return comps


def make_quadratic(spec: QuadraticSpec, rng: Optional[np.random.Generator] = None) -> CompositeProblem:
    """Build the problem and attach the exact minimizer.

    ``x*`` solves ``(H_h + H_g) x = b`` directly; when the sum is singular the
    least-squares solution is used and ``b`` must lie in its range.
    """
    H_h = np.array(spec.H_h, dtype=float)
    H_g = np.array(spec.H_g, dtype=float)
    b = np.array(spec.b, dtype=float).ravel()
    n = H_h.shape[0]
    if H_g.shape != (n, n) or b.shape != (n,):
        raise ValueError("H_h, H_g and b dimensions disagree")
    ev_h = _sym_eigs(H_h, "H_h")
    ev_g = _sym_eigs(H_g, "H_g")
    H = H_h + H_g
    ev = np.linalg.eigvalsh(H)
    mu = max(float(ev[0]), 0.0)
    if mu <= _PSD_TOL * max(1.0, ev[-1]):
        mu = 0.0
    L_h = float(ev_h[-1])
    L_g = max(float(ev_g[-1]), 0.0)
    L_f = max(float(ev[-1]), L_h)

    if mu > 0:
        x_star = np.linalg.solve(H, b)
    else:
        x_star = np.linalg.lstsq(H, b, rcond=None)[0]
        if np.linalg.norm(H @ x_star - b) > 1e-8 * max(1.0, np.linalg.norm(b)):
            raise ValueError("b is not in the range of H_h + H_g; no minimizer exists")
    f_star = -0.5 * float(b @ x_star)

    h = SmoothTerm(value=lambda x: 0.5 * float(x @ (H_h @ x)) - float(b @ x),
                   grad=lambda x: H_h @ x - b, L=L_h,
                   partial=lambda x, i: float(H_h[i] @ x) - b[i],
                   coord_L=np.diag(H_h).copy())
    gval = lambda x: 0.5 * float(x @ (H_g @ x))
    ggrad = lambda x: H_g @ x
    mode = spec.mode
    if mode == "full":
        g = GTerm(GMode.FULL, gval, ggrad, L_g, n=n)
    elif mode == "coordinate":
        beta = np.diag(H_g).copy()
        if np.any(beta <= 0):
            raise ValueError("coordinate mode needs a positive diagonal in H_g")
        g = GTerm(GMode.COORDINATE, gval, ggrad, L_g, beta=beta,
                  partial=lambda x, i: float(H_g[i] @ x), n=n)
    elif mode == "finite_sum":
        comps = spec.components
        if comps is None:
            if spec.m is None:
                raise ValueError("finite-sum mode needs m or components")
            comps = _split_components(H_g, spec.m)
        comps = np.asarray(comps, dtype=float)
        if comps.ndim == 2:
            rows = comps
            m = rows.shape[0]
            if not np.allclose(rows.T @ rows / m, H_g, atol=1e-10 * max(1.0, L_g)):
                raise ValueError("component rows do not average to H_g")
            comp_L = np.einsum("ij,ij->i", rows, rows)
            cg = lambda x, k: rows[k] * float(rows[k] @ x)
            cgs = lambda x: rows * (rows @ x)[:, None]
        else:
            m = comps.shape[0]
            if not np.allclose(comps.mean(axis=0), H_g, atol=1e-10 * max(1.0, L_g)):
                raise ValueError("component matrices do not average to H_g")
            comp_L = np.array([max(np.linalg.eigvalsh(C)[-1], 0.0) for C in comps])
            cg = lambda x, k: comps[k] @ x
            cgs = lambda x: np.einsum("kij,j->ki", comps, x)
        g = GTerm(GMode.FINITE_SUM, gval, ggrad, L_g, m=m, component_grad=cg,
                  component_L=comp_L, component_grads=cgs, n=n)
    else:
        raise ValueError(f"unknown g mode {mode!r}")
    params = dict(spec.params)
    params.update(L_h=L_h, L_g=L_g, mu=mu, n=n, mode=mode)
    return CompositeProblem(n, h, g, mu, L_f, name=spec.name, x_star=x_star,
                            f_star=f_star, params=params)


def _haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    Z = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))


def quadratic_family(n: int = 100, L_h: float = 1.0, L_g: float = 100.0, mu: float = 1e-3,
                     mode: str = "full", m: Optional[int] = None, seed: int = 0,
                     rotate: bool = True, x_star_norm: float = 1.0,
                     spectrum: str = "uniform", log_min: float = 1e-9,
                     name: str = "quadratic") -> CompositeProblem:
    """Random quadratic with prescribed ``L_h``, ``L_g`` and ``mu``.

    ``H_h`` and ``H_g`` share one eigenbasis with spectra
    ``L_h u`` and ``mu + (L_g - mu) v`` where ``u, v`` are uniform on
    ``[0, 1]`` with both endpoints pinned, so ``lambda_max(H_h) = L_h`` and
    ``lambda_max(H_g) = L_g`` exactly and ``lambda_min(H_h + H_g) = mu``.
    ``spectrum="log"`` draws the free entries of ``u, v`` log-uniformly from
    ``[log_min, 1]`` instead, which keeps many slow directions when ``mu = 0``.
    The minimizer is a random vector of norm ``x_star_norm``.

    Finite-sum mode instead uses ``g = (1/m) sum_k (a_k'x)^2/2`` with Gaussian
    rows scaled to ``lambda_max = L_g`` and moves ``mu`` into ``h``.
    """
    if n < 2:
        raise ValueError("family needs n >= 2")
    if not (L_h > 0 and L_g >= 0 and mu >= 0):
        raise ValueError("need L_h > 0, L_g >= 0, mu >= 0")
    rng = make_rng(seed)
    Q = _haar_orthogonal(n, rng) if rotate else np.eye(n)
    if spectrum == "uniform":
        draw = lambda: rng.uniform(size=n - 2)
    elif spectrum == "log":
        draw = lambda: 10.0 ** rng.uniform(math.log10(log_min), 0.0, size=n - 2)
    else:
        raise ValueError(f"unknown spectrum {spectrum!r}")
    u = np.concatenate([[0.0, 1.0], draw()])
    v = np.concatenate([[0.0], draw(), [1.0]])
    x_star = rng.standard_normal(n)
    x_star *= x_star_norm / np.linalg.norm(x_star)
    params = dict(family=True, seed=seed)
    if mode == "finite_sum":
        m = n if m is None else m
        rows = rng.standard_normal((m, n))
        scale = np.linalg.eigvalsh(rows.T @ rows / m)[-1]
        rows *= math.sqrt(L_g / scale) if L_g > 0 else 0.0
        s_h = mu + (L_h - mu) * u
        H_h = (Q * s_h) @ Q.T
        H_g = rows.T @ rows / m
        spec = QuadraticSpec(_sym(H_h), _sym(H_g), (H_h + H_g) @ x_star, mode, m, rows,
                             name=name, params=params)
    else:
        s_h = L_h * u
        s_g = mu + (L_g - mu) * v
        H_h = (Q * s_h) @ Q.T
        H_g = (Q * s_g) @ Q.T
        spec = QuadraticSpec(_sym(H_h), _sym(H_g), (H_h + H_g) @ x_star, mode, m,
                             name=name, params=params)
    return make_quadratic(spec)


def _sym(H: np.ndarray) -> np.ndarray:
    return 0.5 * (H + H.T)


# --------------------------------------------------------------------------
# kernel SVM


def smoothed_hinge(z, gamma_s: float):
    """Huber-smoothed ``max(0, z)``.

    Returns ``(value, derivative)``; ``z`` may be a scalar or an array.
    The function is convex, ``1/gamma_s``-smooth and lies within
    ``gamma_s/2`` below the hinge.
    """
    if not gamma_s > 0:
        raise ValueError("gamma_s must be positive")
    z = np.asarray(z, dtype=float)
    d = np.clip(z / gamma_s, 0.0, 1.0)
    val = np.where(z >= gamma_s, z - 0.5 * gamma_s, np.where(z <= 0.0, 0.0, z * z / (2.0 * gamma_s)))
    if val.ndim == 0:
        return float(val), float(d)
    return val, d


def rbf_kernel(points, gamma_kernel: float, jitter: float = 1e-10) -> np.ndarray:
    """``K_ij = exp(-gamma |a_i - a_j|^2)`` plus ``jitter * I``."""
    a = np.atleast_2d(np.asarray(points, dtype=float))
    if a.shape[0] < 1:
        raise ValueError("need at least one point")
    sq = np.einsum("ij,ij->i", a, a)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * a @ a.T, 0.0)
    np.fill_diagonal(d2, 0.0)
    K = np.exp(-gamma_kernel * d2)
    K = 0.5 * (K + K.T)
    K[np.diag_indices_from(K)] += jitter
    return K


def power_max_eig(matvec, n: int, iters: int = 100, rtol: float = 1e-6, seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric PSD operator by power iteration."""
    v = make_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = matvec(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = float(v @ w)
        v = w / nw
        if abs(new - lam) <= rtol * abs(new):
            lam = new
            break
        lam = new
    return lam


@dataclass
class KernelSvmSpec:
    points: np.ndarray
    labels: np.ndarray
    gamma_kernel: float = 10.0
    lam: float = 0.1
    gamma_s: float = 0.01
    name: str = "svm"


def gen_svm(m: int = 200, n_features: int = 5, seed: int = 0, flip: float = 0.05,
            **kw) -> KernelSvmSpec:
    """Synthetic points in the unit cube labelled by a random hyperplane
    through the centre, with a fraction ``flip`` of labels flipped."""
    rng = make_rng(seed)
    a = rng.uniform(size=(m, n_features))
    w = rng.standard_normal(n_features)
    lab = np.where((a - 0.5) @ w >= 0.0, 1.0, -1.0)
    lab[rng.uniform(size=m) < flip] *= -1.0
    return KernelSvmSpec(a, lab, **kw)


def make_svm(spec: KernelSvmSpec) -> CompositeProblem:
    """Kernel SVM with the intercept as the last coordinate.

    ``h(x) = (lam/2) w'Kw`` on the kernel weights ``w = x[:m]``;
    ``g = (1/m) sum_k l(1 - b_k((Kw)_k + x0))`` in finite-sum mode.
    """
    a = np.atleast_2d(np.asarray(spec.points, dtype=float))
    lab = np.asarray(spec.labels, dtype=float).ravel()
    m = a.shape[0]
    if lab.shape != (m,):
        raise ValueError("one label per point required")
    if not np.all(np.isin(lab, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if not (spec.lam > 0 and spec.gamma_s > 0 and spec.gamma_kernel > 0):
        raise ValueError("lam, gamma_s and gamma_kernel must be positive")
    K = rbf_kernel(a, spec.gamma_kernel)
    lam, gs = spec.lam, spec.gamma_s
    n = m + 1
    Khat = np.hstack([K, np.ones((m, 1))])      # rows (K_k, 1)

    def margins(x):
        return 1.0 - lab * (Khat @ x)

    def h_val(x):
        w = x[:m]
        return 0.5 * lam * float(w @ (K @ w))

    def h_grad(x):
        out = np.zeros(n)
        out[:m] = lam * (K @ x[:m])
        return out

    def h_partial(x, i):
        return lam * float(K[i] @ x[:m]) if i < m else 0.0

    def g_val(x):
        return float(np.mean(smoothed_hinge(margins(x), gs)[0]))

    def weights(x):
        return -lab * smoothed_hinge(margins(x), gs)[1]

    def g_grad(x):
        return Khat.T @ weights(x) / m

    def comp_grad(x, k):
        z = 1.0 - lab[k] * float(Khat[k] @ x)
        return -lab[k] * smoothed_hinge(z, gs)[1] * Khat[k]

    def comp_grads(x):
        return weights(x)[:, None] * Khat

    L_h = lam * power_max_eig(lambda v: K @ v, m)
    comp_L = np.einsum("ij,ij->i", Khat, Khat) / gs
    L_g = power_max_eig(lambda v: Khat.T @ (Khat @ v), n) / (m * gs)
    h = SmoothTerm(h_val, h_grad, L_h, partial=h_partial,
                   coord_L=np.append(lam * np.diag(K), 0.0))
    g = GTerm(GMode.FINITE_SUM, g_val, g_grad, L_g, m=m, component_grad=comp_grad,
              component_L=comp_L, component_grads=comp_grads, n=n)
    params = dict(m=m, n_features=a.shape[1], gamma_kernel=spec.gamma_kernel, lam=lam,
                  gamma_s=gs, L_h=L_h, L_g=L_g)
    prob = CompositeProblem(n, h, g, 0.0, L_h + L_g, name=spec.name, params=params)
    prob.params["kernel"] = K
    return prob


# --------------------------------------------------------------------------
# softmax log-density


def logsumexp_grad(A: CsrMatrix, x) -> tuple[float, np.ndarray]:
    """``log sum_k exp(<A_k, x>)`` and its gradient ``A' softmax(Ax)``."""
    z = A.matvec(x)
    val = float(logsumexp(z))
    return val, A.rmatvec(softmax(z))


@dataclass
class LogDensitySpec:
    """``h(x) = log sum_k exp(<A_k, x>) + <c, x>`` and ``g(x) = x'G2 x/2``.

    ``c`` is an optional linear term (``None`` means zero).
    """

    A: CsrMatrix
    G2: np.ndarray
    c: Optional[np.ndarray] = None
    name: str = "logdensity"
    params: dict = field(default_factory=dict)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LogDensitySpec):
            return NotImplemented
        same_c = (self.c is None and other.c is None) or (
            self.c is not None and other.c is not None and np.array_equal(self.c, other.c))
        return self.A == other.A and np.array_equal(self.G2, other.G2) and same_c

    @property
    def L_h(self) -> float:
        return float(np.max(self.A.column_norms_sq()))

    @property
    def beta(self) -> np.ndarray:
        return np.diag(self.G2).copy()


def gen_log_density(n: int, p: int, density: float, seed: int = 0) -> LogDensitySpec:
    """Random sparse ``A`` (``p x n``, entries ``U(-1, 1)``) and
    ``G2 = sum_i lam_i e_i' e_i`` with ``lam`` on the simplex and
    ``e_i`` entries ``U(1, 2)``.

    Bernoulli(``density``) sparsity pattern; an empty column gets one entry
    in a random row so that every coordinate enters ``h``.
    """
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    rng = make_rng(seed)
    mask = rng.uniform(size=(p, n)) < density
    for j in np.flatnonzero(~mask.any(axis=0)):
        mask[rng.integers(p), j] = True
    rows, cols = np.nonzero(mask)
    vals = rng.uniform(-1.0, 1.0, size=rows.size)
    A = CsrMatrix.from_scipy(sp.csr_matrix((vals, (rows, cols)), shape=(p, n)))
    lam = rng.dirichlet(np.ones(n))
    E = rng.uniform(1.0, 2.0, size=(n, n))
    G2 = (E.T * lam) @ E
    G2 = 0.5 * (G2 + G2.T)
    return LogDensitySpec(A, G2, params=dict(n=n, p=p, density=density, seed=seed))


def make_log_density(spec: LogDensitySpec) -> CompositeProblem:
    """Coordinate-mode problem; ``L_h`` is the larger of the maximal squared
    column norm and the maximal squared row norm of ``A`` (the latter always
    bounds the softmax Hessian)."""
    A = spec.A
    p, n = A.shape
    G2 = np.asarray(spec.G2, dtype=float)
    if G2.shape != (n, n):
        raise ValueError("G2 must be n x n")
    c = np.zeros(n) if spec.c is None else np.asarray(spec.c, dtype=float)
    ev = _sym_eigs(G2, "G2")
    beta = np.diag(G2).copy()
    if np.any(beta <= 0):
        raise ValueError("G2 needs a positive diagonal")
    col_sq = A.column_norms_sq()
    row_sq = np.asarray(A.scipy.multiply(A.scipy).sum(axis=1)).ravel()
    L_h = float(max(col_sq.max(), row_sq.max()))
    coord_h = np.asarray(A.csc.multiply(A.csc).max(axis=0).todense()).ravel()

    def h_val(x):
        return float(logsumexp(A.matvec(x))) + float(c @ x)

    def h_grad(x):
        return logsumexp_grad(A, x)[1] + c

    def h_partial(x, i):
        z = A.matvec(x)
        idx, v = A.col(i)
        return float(v @ softmax(z)[idx]) + c[i]

    g = GTerm(GMode.COORDINATE, lambda x: 0.5 * float(x @ (G2 @ x)), lambda x: G2 @ x,
              float(ev[-1]), beta=beta, partial=lambda x, i: float(G2[i] @ x), n=n)
    h = SmoothTerm(h_val, h_grad, L_h, partial=h_partial, coord_L=np.maximum(coord_h, 0.0))
    mu = max(float(ev[0]), 0.0)
    params = dict(spec.params)
    params.update(L_h=L_h, L_h_columns=float(col_sq.max()), L_g=float(ev[-1]), mu=mu,
                  nnz=A.nnz)
    prob = CompositeProblem(n, h, g, mu, L_h + float(ev[-1]), name=spec.name, params=params)
    prob.params["A"] = A
    prob.params["G2"] = G2
    prob.params["c"] = c
    return prob


# --------------------------------------------------------------------------
# CSV loading


@dataclass
class CsvData:
    """Parsed CSV. ``labels`` is set for the ``svm`` schema only."""

    values: np.ndarray
    labels: Optional[np.ndarray]
    n_rows: int
    n_cols: int


def load_csv(path, schema: str = "matrix", skip_header: bool = False) -> CsvData:
    """Load comma-separated decimals.

    ``schema="svm"``: the last column holds labels in ``{-1, +1}`` and the
    others are features. ``schema="matrix"``: all columns are values. Errors
    name the 1-based line number.
    """
    if schema not in ("matrix", "svm"):
        raise ValueError(f"unknown schema {schema!r}")
    rows = []
    width = None
    with open(Path(path), newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if skip_header and lineno == 1:
                continue
            if not rec or all(not s.strip() for s in rec):
                continue
            try:
                vals = [float(s) for s in rec]
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: cannot parse {','.join(rec)!r} as decimals") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ValueError(f"{path}: line {lineno}: expected {width} columns, got {len(vals)}")
            if schema == "svm" and vals[-1] not in (-1.0, 1.0):
                raise ValueError(f"{path}: line {lineno}: label {rec[-1].strip()!r} is not -1 or +1")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(rows, dtype=float)
    if schema == "svm":
        if arr.shape[1] < 2:
            raise ValueError(f"{path}: svm schema needs at least one feature column")
        return CsvData(arr[:, :-1], arr[:, -1].copy(), arr.shape[0], arr.shape[1])
    return CsvData(arr, None, arr.shape[0], arr.shape[1])


# --------------------------------------------------------------------------
# presets


def _quad_preset(mode: str, m: Optional[int] = None):
    def build(seed: int = 0, n: int = 100, L_h_scale: float = 1.0, L_g_scale: float = 1.0,
              mu: float = 1e-3, L_h: float = 1.0, L_g: float = 100.0, m_: Optional[int] = m,
              name: str = ""):
        return quadratic_family(n, L_h * L_h_scale, L_g * L_g_scale, mu, mode=mode, m=m_,
                                seed=seed, name=name)
    return build


def _svm_preset(m: int):
    def build(seed: int = 0, m_: int = m, n_features: int = 5, gamma_kernel: float = 10.0,
              lam: float = 0.1, gamma_s: float = 0.01, name: str = ""):
        return make_svm(gen_svm(m_, n_features, seed, gamma_kernel=gamma_kernel, lam=lam,
                                gamma_s=gamma_s, name=name))
    return build


def _logdensity_preset(n: int, p: int, density: float):
    def build(seed: int = 0, n_: int = n, p: int = p, density: float = density, name: str = ""):
        spec = gen_log_density(n_, p, density, seed)
        spec.name = name
        return make_log_density(spec)
    return build


# name -> (builder, suggested solver overrides)
PRESETS = {
    "quad-cond100": (_quad_preset("full"), {}),
    "quad-coord": (_quad_preset("coordinate"), {}),
    "quad-sum": (_quad_preset("finite_sum", m=50), {}),
    "svm-desk": (_svm_preset(200), {}),
    "svm-paper": (_svm_preset(4000), {}),
    "logdensity-desk": (_logdensity_preset(50, 600, 0.01), {"L_factor": 25.0}),
    "logdensity-paper": (_logdensity_preset(500, 6000, 0.001), {"L_factor": 25.0}),
}

_AXIS_KEYS = {"n": {"quad": "n", "svm": "m_", "logdensity": "n_"},
              "m": {"quad": "m_", "svm": "m_"}}


def make_preset(name: str, seed: int = 0, **overrides) -> CompositeProblem:
    """Build a named preset.

    Quadratic presets accept ``n, m, L_h_scale, L_g_scale, mu``; SVM presets
    ``m, n_features, gamma_kernel, lam, gamma_s``; log-density presets
    ``n, p, density``. The preset's suggested solver settings land in
    ``problem.params["suggested"]``.
    """
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    build, suggested = PRESETS[name]
    family = name.split("-")[0]
    kw = {}
    for k, v in overrides.items():
        if v is None:
            continue
        key = _AXIS_KEYS.get(k, {}).get(family, k)
        kw[key] = v
    try:
        prob = build(seed=seed, name=name, **kw)
    except TypeError as exc:
        raise ValueError(f"preset {name!r} does not accept {sorted(overrides)}: {exc}") from None
    prob.params["preset"] = name
    prob.params["seed"] = seed
    prob.params["suggested"] = dict(suggested)
    return prob
