"""Scalar and matrix phi/psi functions.

phi_0(z) = exp(z), phi_{k+1}(z) = (phi_k(z) - 1/k!) / z, phi_k(0) = 1/k!.
psi_j(z) = sum_k p[j,k] phi_k(z) for the weight row of stage function j.

Matrix functions are evaluated through a single exponential of a block
augmented matrix; the recurrence is only used for scalars, where the
argument is known to be away from zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np

__all__ = [
    "MatrixFunctionError",
    "PsiWeights",
    "phi_scalar",
    "exp_matrix",
    "phi_chain_action",
    "phi_matrices",
    "phi_matrix",
    "psi_matrix",
    "psi_scalar",
]

TAYLOR_SWITCH = 0.5
TAYLOR_TERMS = 30

# Degree-13 Pade numerator coefficients (Higham 2005).
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


class MatrixFunctionError(ArithmeticError):
    """Raised when a Pade solve is singular or produces non-finite values."""


@dataclass(frozen=True)
class PsiWeights:
    """Weights p[j,1..j] of one psi function, kept as exact rationals."""

    j: int
    p_row: tuple[Fraction, ...]
    p_tilde: Fraction = field(init=False)

    def __post_init__(self):
        row = tuple(Fraction(x) for x in self.p_row)
        if self.j < 1 or len(row) > self.j:
            raise ValueError(f"psi_{self.j} takes at most {self.j} weights, got {len(row)}")
        row = row + (Fraction(0),) * (self.j - len(row))
        object.__setattr__(self, "p_row", row)
        object.__setattr__(
            self, "p_tilde", sum((c / factorial(k) for k, c in enumerate(row, start=1)), Fraction(0))
        )

    @classmethod
    def from_tableau_row(cls, p, j: int) -> "PsiWeights":
        """Weights of psi_j from a (lower-triangular) p matrix, 1-based j."""
        return cls(j, tuple(p[j - 1][:j]))

    def taylor_coefficient(self, i: int) -> Fraction:
        """Coefficient of z**i in psi_j(z)."""
        return sum((c / factorial(i + k) for k, c in enumerate(self.p_row, start=1)), Fraction(0))

    @property
    def floats(self) -> np.ndarray:
        return np.array([float(c) for c in self.p_row])


def phi_scalar(k: int, z):
    """phi_k(z) for real scalars or arrays (elementwise).

    Uses a 30-term Taylor series for |z| < 0.5 and the recurrence from
    exp(z) elsewhere.
    """
    if k < 0:
        raise ValueError("phi index must be non-negative")
    z = np.asarray(z, dtype=float)
    if k == 0:
        out = np.exp(z)
        return out if out.ndim else float(out)

    small = np.abs(z) < TAYLOR_SWITCH
    out = np.empty_like(z)

    zs = z[small]
    acc = np.zeros_like(zs)
    for i in reversed(range(TAYLOR_TERMS)):
        acc = acc * zs + 1.0 / factorial(i + k)
    out[small] = acc

    zl = z[~small]
    val = np.exp(zl)
    for m in range(k):
        val = (val - 1.0 / factorial(m)) / zl
    out[~small] = val
    return out if out.ndim else float(out)


def psi_scalar(w: PsiWeights, z):
    """psi_j(z) evaluated elementwise through phi_scalar."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    for k, c in enumerate(w.p_row, start=1):
        if c:
            out = out + float(c) * phi_scalar(k, z)
    return out if out.ndim else float(out)


def exp_matrix(A) -> np.ndarray:
    """exp(A) by degree-13 Pade approximation with scaling and squaring."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"exp_matrix needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if not np.all(np.isfinite(A)):
        raise MatrixFunctionError("non-finite entries in matrix argument")

    norm1 = np.linalg.norm(A, 1)
    s = 0
    if norm1 > _THETA13:
        s = int(np.ceil(np.log2(norm1 / _THETA13)))
        A = A / 2.0**s

    b = _PADE13
    ident = np.eye(n)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    try:
        X = np.linalg.solve(V - U, V + U)
    except np.linalg.LinAlgError as exc:
        raise MatrixFunctionError("singular Pade denominator") from exc
    for _ in range(s):
        X = X @ X
    if not np.all(np.isfinite(X)):
        raise MatrixFunctionError("matrix exponential overflowed")
    return X


def phi_chain_action(A, b, p: int) -> list[np.ndarray]:
    """[phi_1(A) b, ..., phi_p(A) b] from one exponential of size n + p."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    if p < 1:
        raise ValueError("p must be at least 1")
    # unit-norm coupling column keeps ||b|| out of the scaling decision
    beta = float(np.linalg.norm(b))
    if beta == 0.0:
        return [np.zeros(n) for _ in range(p)]
    aug = np.zeros((n + p, n + p))
    aug[:n, :n] = A
    aug[:n, n] = b / beta
    aug[n + np.arange(p - 1), n + np.arange(1, p)] = 1.0
    E = exp_matrix(aug)
    return [beta * E[:n, n + k] for k in range(p)]


def phi_matrices(A, k: int) -> list[np.ndarray]:
    """[phi_0(A), ..., phi_k(A)] from the exponential of a block upshift matrix.

    The augmented matrix has A in the leading block and identity couplings on
    the block superdiagonal; block (0, j) of its exponential is phi_j(A).
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"phi_matrices needs a square matrix, got shape {A.shape}")
    if k == 0:
        return [exp_matrix(A)]
    size = n * (k + 1)
    M = np.zeros((size, size))
    M[:n, :n] = A
    ident = np.eye(n)
    for blk in range(k):
        M[blk * n : (blk + 1) * n, (blk + 1) * n : (blk + 2) * n] = ident
    E = exp_matrix(M)
    return [E[:n, j * n : (j + 1) * n].copy() for j in range(k + 1)]


def phi_matrix(A, k: int) -> np.ndarray:
    return phi_matrices(A, k)[k]


def psi_matrix(w: PsiWeights, A, hg: float) -> np.ndarray:
    """sum_k p[j,k] phi_k(hg * A) as a dense matrix."""
    A = np.asarray(A, dtype=float)
    phis = phi_matrices(hg * A, w.j)
    out = np.zeros_like(A)
    for k, c in enumerate(w.p_row, start=1):
        if c:
            out += float(c) * phis[k]
    return out
