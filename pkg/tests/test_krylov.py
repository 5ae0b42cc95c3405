import numpy as np
import pytest

from epirk.krylov import (
    Adaptive,
    Fixed,
    LinearOperator,
    arnoldi,
    projected_apply,
    psi_action_projected,
    residual_estimate,
)
from epirk.matfunc import PsiWeights, psi_matrix


@pytest.fixture
def system():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((30, 30)) / 3 - np.eye(30)
    b = rng.standard_normal(30)
    return A, b


def test_arnoldi_relation(system):
    A, b = system
    B = arnoldi(A, b, Fixed(8))
    V, H = B.V, B.H
    assert B.m == 8 and B.n == 30
    np.testing.assert_allclose(V.T @ V, np.eye(8), atol=1e-13)
    np.testing.assert_allclose(V.T @ A @ V, H, atol=1e-12)
    assert np.allclose(np.tril(H, -2), 0)
    np.testing.assert_allclose(V[:, 0] * B.beta, b, atol=1e-13)


def test_happy_breakdown():
    A = np.diag(np.arange(1.0, 11.0))
    b = np.zeros(10)
    b[[0, 3, 7]] = 1.0
    B = arnoldi(A, b, Fixed(10))
    assert B.breakdown and B.m == 3
    # the subspace is invariant, so projection is exact
    np.testing.assert_allclose(projected_apply(B, b), A @ b, atol=1e-12)


def test_fixed_size_is_capped_by_dimension(system):
    A, b = system
    assert arnoldi(A, b, Fixed(100)).m <= 30


def test_adaptive_meets_tolerance(system):
    A, b = system
    w = PsiWeights(1, (1,))
    exact = psi_matrix(w, A, 1.0) @ b
    B = arnoldi(LinearOperator.from_matrix(A), b, Adaptive(1e-10, 30, tau=1.0))
    assert B.converged and B.m < 30
    got = B.V @ (psi_matrix(w, B.H, 1.0) @ (B.V.T @ b))
    assert np.linalg.norm(got - exact) <= 1e-8 * np.linalg.norm(b)


def test_adaptive_reports_nonconvergence(system):
    A, b = system
    B = arnoldi(A, b, Adaptive(1e-30, 3))
    assert not B.converged and B.m == 3


def test_residual_estimate_shrinks(system):
    A, b = system
    ests = []
    for m in (2, 4, 8):
        B = arnoldi(A, b, Fixed(m))
        ests.append(residual_estimate(B.H, B.h_next, B.beta, 1.0))
    assert ests[0] > ests[1] > ests[2]


def test_bad_inputs(system):
    A, b = system
    with pytest.raises(ValueError):
        arnoldi(A, np.zeros(30), Fixed(3))
    with pytest.raises(TypeError):
        arnoldi(A, b, 3)
    with pytest.raises(ValueError):
        arnoldi(A, b, Fixed(0))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_projected_powers(system, k):
    A, b = system
    B = arnoldi(A, b, Fixed(6))
    An = B.V @ B.H @ B.V.T
    np.testing.assert_allclose(
        np.linalg.matrix_power(An, k), B.V @ np.linalg.matrix_power(B.H, k) @ B.V.T, atol=1e-11
    )


@pytest.mark.parametrize("row", [(1,), (0, 2), (1, 1, 1), (0.5, -1, 3)])
def test_projected_psi_identity(system, row):
    A, b = system
    w = PsiWeights(len(row), row)
    B = arnoldi(A, b, Fixed(5))
    An = B.V @ B.H @ B.V.T
    v = np.random.default_rng(2).standard_normal(30)
    want = psi_matrix(w, An, 0.8) @ v
    np.testing.assert_allclose(psi_action_projected(B, w, 0.8, v), want, atol=1e-11)
