import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hystrelax.mesh import Mesh, inner_h, laplacian_apply, norm_grad, norm_h, solve_helmholtz


def test_mesh_spacing():
    m = Mesh(2.5, 11)
    assert m.h * (m.n - 1) == pytest.approx(2.5, rel=1e-12)
    assert m.x[0] == 0.0 and m.x[-1] == pytest.approx(2.5)
    with pytest.raises(ValueError):
        Mesh(1.0, 2)
    with pytest.raises(ValueError):
        Mesh(0.0, 5)


def test_laplacian_constant_is_zero():
    m = Mesh(1.0, 17)
    assert np.all(laplacian_apply(m, np.full(17, 3.7)) == 0.0)


def test_laplacian_hand_stencil():
    np.testing.assert_allclose(laplacian_apply(Mesh(2.0, 3), [0.0, 1.0, 0.0]), [2.0, -2.0, 2.0])


def test_laplacian_stacks_along_last_axis():
    m = Mesh(1.0, 9)
    f = np.random.default_rng(0).normal(size=(3, 9))
    np.testing.assert_array_equal(laplacian_apply(m, f)[1], laplacian_apply(m, f[1]))


def test_mesh_mismatch_rejected():
    m = Mesh(1.0, 9)
    with pytest.raises(ValueError):
        inner_h(m, np.ones(9), np.ones(8))
    with pytest.raises(ValueError):
        laplacian_apply(m, np.ones(10))


def _eig_error(n, X=1.0):
    m = Mesh(X, n)
    f = np.cos(np.pi * m.x / X)
    return np.max(np.abs(laplacian_apply(m, f) + (np.pi / X) ** 2 * f))


@pytest.mark.parametrize("n", [101, 201])
def test_neumann_eigenfunction_second_order(n):
    ratio = _eig_error(n) / _eig_error(2 * n - 1)
    assert 3.5 <= ratio <= 4.5


def test_helmholtz_examples():
    m = Mesh(1.0, 51)
    np.testing.assert_allclose(solve_helmholtz(m, np.full(51, 0.3), 5.0), 0.3, rtol=0, atol=1e-14)
    f = np.sin(3 * m.x) + m.x**2
    np.testing.assert_allclose(solve_helmholtz(m, f, 1e-12), f, atol=1e-8)


def test_helmholtz_eigen_relation_against_dense():
    m, alpha = Mesh(2.0, 81), 0.05
    f = np.cos(np.pi * m.x / 2.0)
    dense = np.linalg.solve(np.eye(81) - alpha * _dense_laplacian(m), f)
    g = solve_helmholtz(m, f, alpha)
    np.testing.assert_allclose(g, dense, atol=1e-13)
    np.testing.assert_allclose(g, f / (1 + alpha * (np.pi / 2.0) ** 2), atol=1e-3)


def _dense_laplacian(m):
    # independent assembly from the stencil definition
    n, h2 = m.n, m.h**2
    L = np.zeros((n, n))
    for i in range(n):
        left = i - 1 if i > 0 else 1
        right = i + 1 if i < n - 1 else n - 2
        L[i, i] -= 2.0 / h2
        L[i, left] += 1.0 / h2
        L[i, right] += 1.0 / h2
    return L


def test_dense_matrix_matches_independent_assembly():
    m = Mesh(1.3, 7)
    np.testing.assert_allclose(m.helmholtz_matrix(0.2), np.eye(7) - 0.2 * _dense_laplacian(m), atol=1e-12)


def test_norm_examples():
    m = Mesh(2.0, 11)
    assert inner_h(m, np.ones(11), np.ones(11)) == pytest.approx(2.0, abs=1e-14)
    assert norm_grad(m, np.full(11, 4.0)) == 0.0
    m1 = Mesh(1.0, 101)
    assert inner_h(m1, m1.x, m1.x) == pytest.approx(1 / 3, abs=1e-4)
    assert norm_h(m1, np.full(101, 2.0)) == pytest.approx(2.0)
    assert norm_grad(m1, m1.x) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [101, 201, 401])
def test_self_adjoint_and_mass_conserving(n):
    m = Mesh(1.7, n)
    rng = np.random.default_rng(n)
    f, g = rng.normal(size=n), rng.normal(size=n)
    lf, lg = laplacian_apply(m, f), laplacian_apply(m, g)
    scale = np.abs(lf).max() * np.abs(g).max() * m.x_len
    assert abs(inner_h(m, lf, g) - inner_h(m, f, lg)) <= 1e-10 * scale
    assert abs(inner_h(m, lf, np.ones(n))) <= 1e-10 * scale


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, 33, elements=st.floats(-10, 10)),
    st.floats(1e-6, 1.0),
)
def test_helmholtz_inverse_residual(f, alpha):
    # alpha covers dt and kappa*dt for every shipped step size
    m = Mesh(1.0, 33)
    g = solve_helmholtz(m, f, alpha)
    resid = g - alpha * laplacian_apply(m, g) - f
    assert np.max(np.abs(resid)) <= 1e-10 * max(1.0, np.max(np.abs(f)))
    # the diffusion solve conserves mass
    assert m.integrate(g) == pytest.approx(m.integrate(f), abs=1e-10 * max(1.0, np.abs(f).max()))


@pytest.mark.parametrize("alpha", [10.0, 1e3, 1e6])
def test_helmholtz_large_alpha_backward_stable(alpha):
    m = Mesh(1.0, 33)
    f = np.random.default_rng(1).uniform(-10, 10, 33)
    g = solve_helmholtz(m, f, alpha)
    A = m.helmholtz_matrix(alpha)
    # residual relative to the operator scale: backward stability
    assert np.max(np.abs(A @ g - f)) <= 1e-13 * np.linalg.norm(A, np.inf) * np.max(np.abs(g))
