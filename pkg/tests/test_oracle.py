import numpy as np
import pytest

from stiefel_newton import (
    NotCritical,
    assemble_frame_hessian,
    build_frame,
    custom_model,
    make_stiefel_point,
    procrustes_model,
    random_stiefel,
)
from stiefel_newton.frame import LocalFrame
from stiefel_newton.oracle import (
    audit_frame,
    check_model,
    compare,
    fd_gradient,
    fd_hessian_quadform,
    fd_riemannian_quadform,
    relative_error,
)

from conftest import columns


def test_relative_error_definition():
    assert relative_error(3.0, 1.0) == 2.0
    assert relative_error(0.5, 0.0) == 0.5
    assert relative_error(110.0, 100.0) == pytest.approx(0.1)


def test_compare_report():
    r = compare("x", 1.0 + 1e-9, 1.0, 1e-8)
    assert r.passed and r.abs_error == pytest.approx(1e-9) and "PASS" in r.line()
    assert not compare("x", 2.0, 1.0, 1e-8).passed


def test_fd_gradient_linear_exact():
    M = np.random.default_rng(0).standard_normal((4, 3))
    m = custom_model(lambda U: np.sum(M * U), lambda U: M, shape=(4, 3))
    # at U = 0 the sums cancel exactly; elsewhere the error is cancellation roundoff ~ eps*|G|/h
    assert np.max(np.abs(fd_gradient(m, np.zeros((4, 3)), 1e-5) - M)) <= 1e-11
    assert np.max(np.abs(fd_gradient(m, random_stiefel(4, 3, 0).U, 1e-5) - M)) <= 1e-10


def test_fd_gradient_brockett(brockett42):
    g = fd_gradient(brockett42, columns(1, 2).U)
    assert np.max(np.abs(g - np.array([[2.0, 0], [0, 8], [0, 0], [0, 0]]))) <= 1e-9


def test_fd_gradient_procrustes():
    rng = np.random.default_rng(1)
    A, B = rng.standard_normal((6, 5)), rng.standard_normal((6, 2))
    m = procrustes_model(A, B)
    U = random_stiefel(5, 2, 1).U
    assert relative_error(A.T @ A @ U - A.T @ B, fd_gradient(m, U)) <= 1e-6


def test_fd_hessian_quadform(brockett42):
    rng = np.random.default_rng(2)
    U = random_stiefel(4, 2, 2).U
    V = rng.standard_normal((4, 2))
    exact = 2 * np.trace(V.T @ brockett42.A @ V @ brockett42.N)
    assert fd_hessian_quadform(brockett42, U, V) == pytest.approx(exact, rel=1e-7)
    assert fd_hessian_quadform(brockett42, U, np.zeros((4, 2))) == 0.0


def test_fd_riemannian_matches_frame_hessian(brockett42):
    P = columns(2, 1)
    F = build_frame(P)
    FH = assemble_frame_hessian(brockett42, P, F)
    for k in range(F.dim):
        fd = fd_riemannian_quadform(brockett42, P, F.vectors[k])
        assert abs(FH.H[k, k] - fd) / max(1, abs(fd)) <= 1e-4


def test_fd_riemannian_constant_cost():
    m = custom_model(lambda U: 1.5, lambda U: np.zeros((4, 2)), shape=(4, 2))
    P = random_stiefel(4, 2, 0)
    assert fd_riemannian_quadform(m, P, build_frame(P).vectors[0]) == 0.0


def test_fd_riemannian_saddle_descent_direction(brockett42):
    P = columns(1, 2)
    F = build_frame(P)
    assert F.labels[0] == ("prime", 0, 1)
    assert fd_riemannian_quadform(brockett42, P, F.vectors[0]) < 0


def test_fd_riemannian_refuses_noncritical(brockett42):
    P = random_stiefel(4, 2, 0)
    with pytest.raises(NotCritical):
        fd_riemannian_quadform(brockett42, P, build_frame(P).vectors[0])


@pytest.mark.parametrize("seed", range(5))
def test_audit_random_frame(seed):
    reports = audit_frame(build_frame(random_stiefel(6, 3, seed)))
    assert all(r.passed for r in reports), [r.line() for r in reports if not r.passed]
    assert len(reports) == 8


def test_audit_detects_zeroed_vector():
    F = build_frame(random_stiefel(5, 2, 0))
    vecs = np.array(F.vectors)
    vecs[3] = 0.0
    reports = {r.quantity: r for r in audit_frame(LocalFrame(F.base, F.pivots, vecs, F.labels, F.transform))}
    assert not reports["frame Gram nonsingular (min eigenvalue)"].passed


def test_audit_sphere_frame():
    x = np.array([0.6, 0.0, 0.8, 0.0, 0.0])
    F = build_frame(make_stiefel_point(x.reshape(-1, 1)))
    assert all(r.passed for r in audit_frame(F))
    for k, (_, i, _) in enumerate(F.labels):
        assert np.array_equal(F.vectors[k][:, 0], np.eye(5)[i] - x[i] * x)


def test_check_model_passes(brockett42):
    assert all(r.passed for r in check_model(brockett42, n_probes=3))
