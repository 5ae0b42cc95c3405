"""Arnoldi bases of a Jacobian and reduced-space psi evaluation.

With V the orthonormal Krylov basis and H = V^T J V, the projected Jacobian
A = V H V^T satisfies A^k = V H^k V^T and

    psi_j(hg A) = p~_j (I - V V^T) + V psi_j(hg H) V^T,

so every psi action costs one small dense matrix function.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .matfunc import PsiWeights, phi_chain_action, psi_matrix

__all__ = [
    "LinearOperator",
    "KrylovBasis",
    "Fixed",
    "Adaptive",
    "arnoldi",
    "projected_apply",
    "psi_action_projected",
    "residual_estimate",
]

BREAKDOWN_RTOL = 1e-12


@dataclass(frozen=True)
class LinearOperator:
    dim: int
    apply: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def from_matrix(cls, A) -> "LinearOperator":
        A = np.asarray(A, dtype=float)
        return cls(A.shape[0], lambda v: A @ v)

    def __call__(self, v):
        return self.apply(v)


@dataclass(frozen=True)
class Fixed:
    m: int


@dataclass(frozen=True)
class Adaptive:
    """Grow the basis until the residual estimate at scaling ``tau`` drops below ``tol``."""

    tol: float
    m_max: int
    tau: float = 1.0


@dataclass(frozen=True)
class KrylovBasis:
    V: np.ndarray
    H: np.ndarray
    beta: float
    h_next: float
    breakdown: bool = False
    converged: bool = True

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[0]

    def project(self, v):
        return self.V.T @ v


def residual_estimate(H: np.ndarray, h_next: float, beta: float, tau: float) -> float:
    """h_{m+1,m} * |e_m^T phi_1(tau H) e_1| * beta."""
    m = H.shape[0]
    e1 = np.zeros(m)
    e1[0] = 1.0
    phi1 = phi_chain_action(tau * H, e1, 1)[0]
    return abs(h_next) * abs(phi1[-1]) * beta


def arnoldi(op, b, policy) -> KrylovBasis:
    """Modified Gram-Schmidt Arnoldi with one reorthogonalization pass.

    ``policy`` is ``Fixed(m)`` or ``Adaptive(tol, m_max, tau)``. A happy
    breakdown (subdiagonal below 1e-12 * ||b||) truncates the basis and sets
    ``breakdown``; an adaptive run that hits ``m_max`` first returns with
    ``converged=False``.
    """
    if isinstance(op, np.ndarray):
        op = LinearOperator.from_matrix(op)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    beta = float(np.linalg.norm(b))
    if beta == 0.0 or not np.isfinite(beta):
        raise ValueError("arnoldi needs a nonzero finite starting vector")

    if isinstance(policy, Fixed):
        m_max = policy.m
    elif isinstance(policy, Adaptive):
        m_max = policy.m_max
    else:
        raise TypeError(f"unknown Arnoldi policy {policy!r}")
    m_max = min(m_max, n)
    if m_max < 1:
        raise ValueError("basis size must be at least 1")

    V = np.zeros((n, m_max))
    H = np.zeros((m_max + 1, m_max))
    V[:, 0] = b / beta
    breakdown_tol = BREAKDOWN_RTOL * beta
    converged = isinstance(policy, Fixed)

    for j in range(m_max):
        w = op(V[:, j])
        for _ in range(2):
            for i in range(j + 1):
                c = V[:, i] @ w
                H[i, j] += c
                w = w - c * V[:, i]
        h = float(np.linalg.norm(w))
        H[j + 1, j] = h
        m = j + 1
        if h < breakdown_tol:
            return KrylovBasis(V[:, :m].copy(), H[:m, :m].copy(), beta, h, breakdown=True, converged=True)
        if isinstance(policy, Adaptive):
            if residual_estimate(H[:m, :m], h, beta, policy.tau) <= policy.tol * beta:
                return KrylovBasis(V[:, :m].copy(), H[:m, :m].copy(), beta, h, converged=True)
        if m < m_max:
            V[:, m] = w / h

    return KrylovBasis(V, H[:m_max, :m_max].copy(), beta, float(H[m_max, m_max - 1]), converged=converged)


def projected_apply(basis: KrylovBasis, v) -> np.ndarray:
    """V H V^T v."""
    return basis.V @ (basis.H @ (basis.V.T @ v))


def psi_action_projected(basis: KrylovBasis, w: PsiWeights, hg: float, v, psi_H=None) -> np.ndarray:
    """psi_j(hg V H V^T) v through the reduced-space identity.

    ``psi_H`` may carry a precomputed psi_matrix(w, H, hg).
    """
    V = basis.V
    coords = V.T @ v
    if psi_H is None:
        psi_H = psi_matrix(w, basis.H, hg)
    return float(w.p_tilde) * (v - V @ coords) + V @ (psi_H @ coords)
