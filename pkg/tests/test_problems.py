import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from osplit.core import CsrMatrix, GMode, make_rng
from osplit.problems import (PRESETS, KernelSvmSpec, LogDensitySpec, QuadraticSpec,
                             gen_log_density, gen_svm, load_csv, logsumexp_grad,
                             make_log_density, make_preset, make_quadratic, make_svm,
                             quadratic_family, rbf_kernel, smoothed_hinge)


def small_problems():
    yield quadratic_family(8, 1.0, 20.0, 0.1, seed=0)
    yield quadratic_family(8, 1.0, 20.0, 0.1, mode="coordinate", seed=1)
    yield quadratic_family(8, 1.0, 20.0, 0.1, mode="finite_sum", m=6, seed=2)
    yield make_svm(gen_svm(12, 3, seed=3))
    yield make_log_density(gen_log_density(6, 30, 0.3, seed=4))


def central_diff(fun, x, h=1e-5):
    return np.array([(fun(x + h * e) - fun(x - h * e)) / (2 * h) for e in np.eye(x.size)])


# --- quadratics -------------------------------------------------------------

def test_quadratic_identity():
    p = make_quadratic(QuadraticSpec(np.eye(3), np.zeros((3, 3)), np.zeros(3)))
    assert np.array_equal(p.x_star, np.zeros(3)) and p.f_star == 0.0


def test_quadratic_two_by_two():
    p = make_quadratic(QuadraticSpec(np.diag([1.0, 4.0]), np.diag([2.0, 2.0]), np.array([3.0, 6.0])))
    assert np.allclose(p.x_star, [1, 1], atol=1e-15)
    assert p.f_star == pytest.approx(-4.5, abs=1e-15)


def test_quadratic_ratio_dial():
    p = quadratic_family(20, 1.0, 100.0, 1e-3, seed=0)
    assert p.g.L / p.L_h == pytest.approx(100.0, rel=1e-12)


def test_quadratic_rejects_indefinite():
    with pytest.raises(ValueError):
        make_quadratic(QuadraticSpec(np.diag([1.0, -1.0]), np.zeros((2, 2)), np.zeros(2)))


def test_quadratic_modes():
    assert quadratic_family(5, mode="coordinate", seed=0).g.mode is GMode.COORDINATE
    fs = quadratic_family(5, mode="finite_sum", m=7, seed=0)
    assert fs.g.mode is GMode.FINITE_SUM and fs.g.m == 7


# --- hinge --------------------------------------------------------------------

def test_hinge_examples():
    assert smoothed_hinge(0.0, 0.5) == (0.0, 0.0)
    assert smoothed_hinge(1.0, 0.5) == pytest.approx((0.75, 1.0))
    assert smoothed_hinge(0.25, 0.5) == pytest.approx((0.0625, 0.5))


def test_hinge_rejects_bad_gamma():
    with pytest.raises(ValueError):
        smoothed_hinge(1.0, 0.0)


def test_hinge_convex_on_random_triples():
    r = make_rng(0)
    gs = 0.3
    a, b = r.uniform(-3, 3, 1000), r.uniform(-3, 3, 1000)
    mid = smoothed_hinge((a + b) / 2, gs)[0]
    avg = (smoothed_hinge(a, gs)[0] + smoothed_hinge(b, gs)[0]) / 2
    assert np.all(mid <= avg + 1e-12)


@given(st.floats(-50, 50), st.floats(1e-3, 5.0))
def test_hinge_bias_and_derivative(z, gs):
    v, d = smoothed_hinge(z, gs)
    assert 0.0 <= max(z, 0.0) - v <= gs / 2 + 1e-12
    assert 0.0 <= d <= 1.0


@given(st.floats(-5, 5), st.floats(1e-2, 2.0), st.floats(1e-4, 1.0))
def test_hinge_second_difference(z, gs, t):
    d1 = smoothed_hinge(z + t, gs)[1]
    d0 = smoothed_hinge(z, gs)[1]
    assert (d1 - d0) / t <= 1 / gs + 1e-9


# --- kernel -----------------------------------------------------------------

def test_rbf_entries():
    K = rbf_kernel(np.array([[0.0, 0.0], [1.0, 0.0]]), 10.0)
    assert K[0, 0] == pytest.approx(1.0, abs=1e-9)
    assert K[0, 1] == pytest.approx(math.exp(-10), rel=1e-12)


def test_rbf_psd():
    K = rbf_kernel(make_rng(1).uniform(size=(3, 4)), 10.0)
    assert np.linalg.eigvalsh(K).min() >= -1e-9


# --- logsumexp ----------------------------------------------------------------

def test_logsumexp_at_zero():
    r = make_rng(2)
    A = CsrMatrix.from_dense(r.standard_normal((5, 3)))
    v, g = logsumexp_grad(A, np.zeros(3))
    assert v == pytest.approx(math.log(5), rel=1e-14)
    assert np.allclose(g, A.toarray().mean(axis=0), atol=1e-14)


def test_logsumexp_single_row():
    A = CsrMatrix.from_dense(np.array([[1.0, -2.0, 0.5]]))
    x = np.array([0.3, 0.1, -1.0])
    v, g = logsumexp_grad(A, x)
    assert v == pytest.approx(float(A.toarray()[0] @ x), abs=1e-15) and np.allclose(g, [1, -2, 0.5], atol=0)


def test_logsumexp_finite_differences():
    r = make_rng(3)
    A = CsrMatrix.from_dense(r.standard_normal((5, 3)))
    x = r.standard_normal(3)
    fd = central_diff(lambda y: logsumexp_grad(A, y)[0], x)
    g = logsumexp_grad(A, x)[1]
    assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


def test_logsumexp_stable_and_weights_sum_to_one():
    A = CsrMatrix.from_dense(np.eye(3))
    v, g = logsumexp_grad(A, np.array([1e4, 0.0, -1e4]))
    assert np.isfinite(v) and v == pytest.approx(1e4)
    # with A = I the gradient is the softmax vector itself
    assert abs(g.sum() - 1.0) <= 1e-12 and np.all(np.isfinite(g))


# --- log-density generator ------------------------------------------------------

def test_gen_log_density_nnz():
    spec = gen_log_density(10, 50, 0.1, seed=0)
    assert 25 <= spec.A.nnz <= 75


def test_gen_log_density_diagonal():
    spec = gen_log_density(10, 50, 0.1, seed=0)
    d = np.diag(spec.G2)
    assert np.all(d >= 1.0) and np.all(d <= 4.0)


def test_gen_log_density_deterministic():
    assert gen_log_density(10, 50, 0.1, seed=5) == gen_log_density(10, 50, 0.1, seed=5)
    assert not gen_log_density(10, 50, 0.1, seed=5) == gen_log_density(10, 50, 0.1, seed=6)


def test_gen_log_density_no_empty_columns():
    spec = gen_log_density(30, 5, 0.01, seed=0)
    assert np.all(spec.A.column_norms_sq() > 0)


def test_log_density_linear_term():
    spec = gen_log_density(4, 10, 0.5, seed=1)
    c = np.array([1.0, 0.0, -1.0, 2.0])
    p0 = make_log_density(spec)
    p1 = make_log_density(LogDensitySpec(spec.A, spec.G2, c))
    x = make_rng(0).standard_normal(4)
    assert p1.h.value(x) - p0.h.value(x) == pytest.approx(c @ x)


# --- svm ----------------------------------------------------------------------

def test_svm_rejects_bad_labels():
    with pytest.raises(ValueError):
        make_svm(KernelSvmSpec(np.zeros((2, 2)), np.array([1.0, 0.0])))


def test_svm_intercept_is_last_coordinate():
    spec = gen_svm(10, 2, seed=0)
    p = make_svm(spec)
    assert p.n == 11 and p.mu == 0.0
    x = np.zeros(11)
    x[-1] = 5.0
    # h only sees kernel weights
    assert p.h.value(x) == 0.0 and np.all(p.h.grad(x) == 0.0)


# --- csv --------------------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("0.5,1.25,1\n-2,3e-3,-1\n")
    d = load_csv(f, "svm")
    assert np.array_equal(d.values, [[0.5, 1.25], [-2, 3e-3]])
    assert np.array_equal(d.labels, [1, -1]) and (d.n_rows, d.n_cols) == (2, 3)


def test_csv_header(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write_text("1,2\n3,4\n")
    b.write_text("x,y\n1,2\n3,4\n")
    assert np.array_equal(load_csv(a).values, load_csv(b, skip_header=True).values)


def test_csv_bad_label_names_line(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2,1\n3,4,0\n")
    with pytest.raises(ValueError, match="line 2"):
        load_csv(f, "svm")


def test_csv_ragged(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2\n3\n")
    with pytest.raises(ValueError, match="line 2"):
        load_csv(f)


# --- oracle consistency over all problem families ---------------------------------

@pytest.mark.parametrize("prob", list(small_problems()), ids=lambda p: p.name)
def test_gradients_match_finite_differences(prob):
    r = make_rng(11)
    for _ in range(20):
        x = r.standard_normal(prob.n) * 0.5
        for term in (prob.h, prob.g):
            g = term.grad(x)
            fd = central_diff(term.value, x)
            assert np.linalg.norm(fd - g) <= 1e-6 * max(1.0, np.linalg.norm(g))


@pytest.mark.parametrize("prob", list(small_problems()), ids=lambda p: p.name)
def test_declared_constants_valid(prob):
    r = make_rng(12)
    for _ in range(30):
        x, y = r.standard_normal(prob.n), r.standard_normal(prob.n)
        d = np.linalg.norm(x - y)
        assert np.linalg.norm(prob.h.grad(x) - prob.h.grad(y)) / d <= prob.L_h * (1 + 1e-6)
        assert np.linalg.norm(prob.g.grad(x) - prob.g.grad(y)) / d <= prob.g.L * (1 + 1e-6)
        if prob.g.mode is GMode.COORDINATE:
            i = int(r.integers(prob.n))
            t = r.standard_normal()
            xe = x.copy()
            xe[i] += t
            assert abs(prob.g.partial(xe, i) - prob.g.partial(x, i)) / abs(t) <= prob.g.beta[i] * (1 + 1e-6)
        if prob.g.mode is GMode.FINITE_SUM:
            k = int(r.integers(prob.g.m))
            diff = prob.g.component_grad(x, k) - prob.g.component_grad(y, k)
            assert np.linalg.norm(diff) / d <= prob.g.component_L[k] * (1 + 1e-6)


@pytest.mark.parametrize("prob", [p for p in small_problems() if p.g.mode is GMode.FINITE_SUM],
                         ids=lambda p: p.name)
def test_finite_sum_consistency(prob):
    x = make_rng(13).standard_normal(prob.n)
    avg = prob.g.all_component_grads(x).mean(axis=0)
    assert np.max(np.abs(avg - prob.g.grad(x))) <= 1e-12 * max(1.0, np.max(np.abs(avg)))


def test_coordinate_consistency_log_density():
    p = make_log_density(gen_log_density(6, 30, 0.3, seed=4))
    x = make_rng(14).standard_normal(6)
    stacked = np.array([p.g.partial(x, i) for i in range(6)])
    assert np.allclose(stacked, p.g.grad(x), rtol=0, atol=1e-14)
    h_stacked = np.array([p.h.partial(x, i) for i in range(6)])
    assert np.allclose(h_stacked, p.h.grad(x), rtol=1e-12, atol=1e-14)


# --- presets ------------------------------------------------------------------------

def test_presets_build():
    for name in ("quad-cond100", "svm-desk", "logdensity-desk"):
        assert name in PRESETS
        p = make_preset(name, seed=0)
        assert p.params["preset"] == name and p.n > 0


def test_preset_overrides():
    p = make_preset("quad-cond100", seed=0, n=12)
    assert p.n == 12


def test_unknown_preset():
    with pytest.raises(ValueError):
        make_preset("nope")
