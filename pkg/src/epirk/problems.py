"""Benchmark ODE systems and a high-accuracy reference solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

__all__ = [
    "Problem",
    "lorenz96",
    "lorenz96_initial",
    "allen_cahn",
    "neumann_laplacian",
    "reference_solve",
    "high_accuracy_reference",
    "PROBLEMS",
    "get_problem",
    "autonomize",
    "linear_problem",
]

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class Problem:
    """Autonomous system y' = f(y) with Jacobian access."""

    name: str
    dim: int
    f: Callable[[np.ndarray], np.ndarray]
    jac_vp: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac_diag: Callable[[np.ndarray], np.ndarray]
    jac_dense: Optional[Callable[[np.ndarray], np.ndarray]] = None
    y0: Optional[np.ndarray] = field(default=None, repr=False)
    tspan: tuple = (0.0, 1.0)

    def with_initial(self, y0, tspan=None) -> "Problem":
        kw = dict(self.__dict__)
        kw["y0"] = np.array(y0, dtype=float)
        if tspan is not None:
            kw["tspan"] = tuple(float(t) for t in tspan)
        return Problem(**kw)


def lorenz96(n: int = 40, forcing: float = 8.0) -> Problem:
    """dy_j/dt = -y_{j-1} (y_{j-2} - y_{j+1}) - y_j + F with cyclic indices."""
    if n < 4:
        raise ValueError("Lorenz-96 needs at least 4 variables")
    F = float(forcing)
    idx = np.arange(n)
    im1, im2, ip1 = (idx - 1) % n, (idx - 2) % n, (idx + 1) % n

    def f(y):
        return -y[im1] * (y[im2] - y[ip1]) - y + F

    def jac_vp(y, v):
        return -v[im1] * (y[im2] - y[ip1]) - y[im1] * (v[im2] - v[ip1]) - v

    def jac_diag(y):
        return -np.ones_like(y)

    def jac_dense(y):
        J = -np.eye(n)
        J[idx, im1] = -(y[im2] - y[ip1])
        J[idx, im2] = -y[im1]
        J[idx, ip1] = y[im1]
        return J

    return Problem(f"lorenz96-{n}", n, f, jac_vp, jac_diag, jac_dense, None, (0.0, 1.8))


@lru_cache(maxsize=8)
def _lorenz96_initial(n: int, forcing: float) -> tuple:
    y = np.full(n, float(forcing))
    y[min(19, n - 1)] += 0.01
    prob = lorenz96(n, forcing)
    return tuple(reference_solve(prob, y, 0.0, 0.3))


def lorenz96_initial(n: int = 40, forcing: float = 8.0) -> np.ndarray:
    """Spun-up state: F*1 with component 20 nudged by 0.01, integrated over [0, 0.3]."""
    return np.array(_lorenz96_initial(n, float(forcing)))


def neumann_laplacian(nx: int, ny: int) -> sp.csr_matrix:
    """5-point Laplacian on the closed unit square, Neumann by mirrored ghost points."""

    def lap1d(m):
        d = 1.0 / (m - 1)
        main = -2.0 * np.ones(m)
        upper = np.ones(m - 1)
        lower = np.ones(m - 1)
        upper[0] = 2.0  # ghost u_{-1} = u_1
        lower[-1] = 2.0  # ghost u_{m} = u_{m-2}
        return sp.diags([lower, main, upper], [-1, 0, 1]) / d**2

    # state is u[ix, iy] flattened in C order
    L = sp.kron(lap1d(nx), sp.identity(ny)) + sp.kron(sp.identity(nx), lap1d(ny))
    return sp.csr_matrix(L)


def allen_cahn(nx: int = 64, ny: int | None = None, alpha: float = 0.01, gamma: float = 1.0) -> Problem:
    """u_t = alpha Lap u + gamma (u - u^3) on [0,1]^2 with homogeneous Neumann boundaries."""
    ny = nx if ny is None else ny
    if nx < 3 or ny < 3:
        raise ValueError("grid needs at least 3 points per direction")
    L = alpha * neumann_laplacian(nx, ny)
    Ldiag = L.diagonal()
    n = nx * ny

    def f(u):
        return L @ u + gamma * (u - u**3)

    def jac_vp(u, v):
        return L @ v + gamma * (1.0 - 3.0 * u**2) * v

    def jac_diag(u):
        return Ldiag + gamma * (1.0 - 3.0 * u**2)

    jac_dense = None
    if n <= DENSE_LIMIT:
        Ld = L.toarray()

        def jac_dense(u):
            return Ld + np.diag(gamma * (1.0 - 3.0 * u**2))

    x = np.linspace(0.0, 1.0, nx)
    y = np.linspace(0.0, 1.0, ny)
    X, Y = np.meshgrid(x, y, indexing="ij")
    u0 = 0.4 + 0.1 * (X + Y) + 0.1 * np.sin(10 * X) * np.sin(20 * Y)
    return Problem(f"allencahn-{nx}", n, f, jac_vp, jac_diag, jac_dense, u0.ravel(), (0.0, 1.2))


def linear_problem(M, y0=None, tspan=(0.0, 1.0), name: str = "linear") -> Problem:
    """y' = M y with constant Jacobian M."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    d = np.diag(M).copy()
    return Problem(
        name,
        n,
        lambda y: M @ y,
        lambda y, v: M @ v,
        lambda y: d.copy(),
        lambda y: M.copy(),
        None if y0 is None else np.asarray(y0, dtype=float),
        tuple(tspan),
    )


def reference_solve(
    problem: Problem,
    y0,
    t0: float,
    tf: float,
    tol: float = 1e-12,
    method: str = "RK45",
    atol: float | None = None,
    max_step: float = np.inf,
) -> np.ndarray:
    """Dormand-Prince 5(4) with atol = rtol = tol.

    ``method="DOP853"`` with a capped ``max_step`` gives the tighter
    references used by convergence studies (see ``high_accuracy_reference``).
    """
    y0 = np.asarray(y0, dtype=float)
    if tf == t0:
        return y0.copy()
    atol = tol if atol is None else atol
    rtol = max(tol, 2.5e-14)  # scipy's floor
    sol = solve_ivp(
        lambda t, y: problem.f(y), (t0, tf), y0, method=method, rtol=rtol, atol=atol, max_step=max_step
    )
    if not sol.success:
        raise RuntimeError(f"reference solve failed: {sol.message}")
    return sol.y[:, -1]


def high_accuracy_reference(problem: Problem, y0, t0: float, tf: float) -> np.ndarray:
    """DOP853 at scipy's tightest rtol with steps capped at span/400.

    The cap keeps every local error well under the tolerance; without it the
    rtol floor lets global errors reach about 1e-10 on Lorenz-96.
    """
    return reference_solve(problem, y0, t0, tf, tol=2.5e-14, method="DOP853", atol=1e-16, max_step=abs(tf - t0) / 400)


def autonomize(name: str, dim: int, f: Callable, jac_vp: Callable, df_dt: Callable, y0=None, tspan=(0.0, 1.0)) -> Problem:
    """Wrap y' = f(t, y) as the autonomous system z' = (f(z_t, z_y), 1), z = (y, t).

    ``jac_vp(t, y, v)`` is the state Jacobian action and ``df_dt(t, y)`` the
    explicit time derivative. Diagonal and dense Jacobians are probed column
    by column, so this is meant for small systems.
    """
    n = dim + 1

    def F(z):
        return np.append(f(z[-1], z[:-1]), 1.0)

    def JV(z, v):
        return np.append(jac_vp(z[-1], z[:-1], v[:-1]) + df_dt(z[-1], z[:-1]) * v[-1], 0.0)

    def dense(z):
        return np.column_stack([JV(z, e) for e in np.eye(n)])

    def diag(z):
        return np.diag(dense(z)).copy()

    z0 = None
    if y0 is not None:
        z0 = np.append(np.asarray(y0, dtype=float), float(tspan[0]))
    return Problem(name, n, F, JV, diag, dense, z0, tuple(tspan))


def _lorenz_default():
    return lorenz96().with_initial(lorenz96_initial(), (0.0, 1.8))


PROBLEMS = {
    "lorenz96": _lorenz_default,
    "allencahn-64": lambda: allen_cahn(64),
    "allencahn-256": lambda: allen_cahn(256),
}
RESERVED = {"swe": "shallow-water model is out of scope"}


def get_problem(name: str) -> Problem:
    if name in RESERVED:
        raise NotImplementedError(f"problem {name!r} is not implemented: {RESERVED[name]}")
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(PROBLEMS)}") from None
