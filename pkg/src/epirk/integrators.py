"""EPIRK-W and EPIRK-K steppers with fixed-step and adaptive drivers.

An s-stage scheme with Jacobian approximation A_n reads

    Y_i     = y_n + a_i1 psi_1(g_i1 h A_n) h f(y_n)
                  + sum_{j=2..i} a_ij psi_j(g_ij h A_n) h Delta^(j-1) r(y_n),
    y_{n+1} = same with the b row and the last g row,

where r(Y) = f(Y) - f(y_n) - A_n (Y - y_n) and Delta^(j) r(y_n) is the
forward difference over r(Y_0) = 0, r(Y_1), ..., r(Y_j).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np

from .krylov import Adaptive, Fixed, KrylovBasis, LinearOperator, arnoldi, projected_apply
from .matfunc import MatrixFunctionError, PsiWeights, phi_chain_action, psi_matrix, psi_scalar
from .methods import Tableau

__all__ = [
    "ExactDense",
    "Diagonal",
    "Identity",
    "Zero",
    "KrylovProjected",
    "ClassicalAdaptive",
    "Given",
    "parse_mode",
    "mode_label",
    "default_mode",
    "StepResult",
    "StepFailure",
    "IntegrationError",
    "ControllerConfig",
    "RunStats",
    "IntegrationResult",
    "epirk_w_step",
    "epirk_k_step",
    "make_stepper",
    "integrate_fixed",
    "integrate_adaptive",
]

DENSE_PSI_LIMIT = 512


# Jacobian approximations --------------------------------------------------


@dataclass(frozen=True)
class ExactDense:
    """A_n = J_n; dense psi actions up to 512 unknowns, adaptive Arnoldi beyond."""

    fallback_tol: float = 1e-9
    fallback_m_max: int = 200


@dataclass(frozen=True)
class Diagonal:
    """A_n = diag(J_n)."""


@dataclass(frozen=True)
class Identity:
    """A_n = I."""


@dataclass(frozen=True)
class Zero:
    """A_n = 0; the scheme becomes explicit Runge-Kutta."""


@dataclass(frozen=True)
class KrylovProjected:
    """A_n = V H V^T from m Arnoldi steps on (J_n, f(y_n))."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("Krylov basis size must be positive")


@dataclass(frozen=True)
class ClassicalAdaptive:
    """A_n = J_n with one adaptive Arnoldi projection per distinct vector."""

    tol: float = 1e-12
    m_max: int = 100


@dataclass(frozen=True)
class Given:
    """A fixed user matrix, mostly for testing."""

    matrix: np.ndarray = field(repr=False)


def parse_mode(text: str):
    """exact | diag | identity | zero | krylov:M | classical:TOL"""
    text = text.strip().lower()
    simple = {"exact": ExactDense(), "diag": Diagonal(), "identity": Identity(), "zero": Zero()}
    if text in simple:
        return simple[text]
    kind, _, arg = text.partition(":")
    try:
        if kind == "krylov" and arg:
            return KrylovProjected(int(arg))
        if kind == "classical":
            return ClassicalAdaptive(float(arg)) if arg else ClassicalAdaptive()
    except ValueError:
        pass
    raise ValueError(f"bad Jacobian mode {text!r}; expected exact, diag, identity, zero, krylov:M or classical:TOL")


def mode_label(mode) -> str:
    if isinstance(mode, KrylovProjected):
        return f"krylov:{mode.m}"
    if isinstance(mode, ClassicalAdaptive):
        return f"classical:{mode.tol:g}"
    return {ExactDense: "exact", Diagonal: "diag", Identity: "identity", Zero: "zero", Given: "given"}[type(mode)]


def default_mode(tab: Tableau):
    if tab.execution == "classical":
        return ClassicalAdaptive(1e-12)
    if tab.family == "K":
        return KrylovProjected(4)
    return ExactDense()


# results and errors -------------------------------------------------------


class StepFailure(ArithmeticError):
    """A step produced non-finite values or an unconverged projection."""


class IntegrationError(RuntimeError):
    """The driver gave up (step size underflow or too many rejections)."""


@dataclass
class StepResult:
    """Increments dy, dy_embedded are kept separately for compensated summation."""

    y_next: np.ndarray
    y_embedded: np.ndarray
    dy: np.ndarray = field(repr=False, default=None)
    dy_embedded: np.ndarray = field(repr=False, default=None)
    stages: list = field(default_factory=list, repr=False)
    krylov_dims: list = field(default_factory=list)
    breakdown: bool = False


class _Counted:
    """Problem proxy that counts f and Jacobian-vector evaluations."""

    def __init__(self, problem):
        self.problem = problem
        self.dim = problem.dim
        self.nf = 0
        self.njvp = 0
        self.njac = 0

    def f(self, y):
        self.nf += 1
        return self.problem.f(y)

    def jac_vp(self, y, v):
        self.njvp += 1
        return self.problem.jac_vp(y, v)

    def jac_diag(self, y):
        self.njac += 1
        return self.problem.jac_diag(y)

    @property
    def jac_dense(self):
        jd = self.problem.jac_dense
        if jd is None:
            return None

        def dense(y):
            self.njac += 1
            return jd(y)

        return dense


def _finite(*arrays):
    for x in arrays:
        if not np.all(np.isfinite(x)):
            raise StepFailure("non-finite values in step")


# per-step linear algebra --------------------------------------------------


class _DenseOps:
    def __init__(self, M):
        self.M = M
        self.dims = []

    def A(self, v):
        return self.M @ v

    def psi(self, w: PsiWeights, hg, v, key=None):
        if hg == 0.0:
            return float(w.p_tilde) * v
        phis = phi_chain_action(hg * self.M, v, w.j)
        out = np.zeros_like(v)
        for k, c in enumerate(w.p_row, start=1):
            if c:
                out += float(c) * phis[k - 1]
        return out


class _DiagOps:
    def __init__(self, d):
        self.d = d
        self.dims = []

    def A(self, v):
        return self.d * v

    def psi(self, w, hg, v, key=None):
        return psi_scalar(w, hg * self.d) * v


class _ScalarOps(_DiagOps):
    def __init__(self, lam: float):
        self.lam = lam
        self.dims = []

    def A(self, v):
        return self.lam * v

    def psi(self, w, hg, v, key=None):
        if self.lam == 0.0 or hg == 0.0:
            return float(w.p_tilde) * v
        return psi_scalar(w, hg * self.lam) * v


class _ProjectedOps:
    """A_n = V H V^T through a fixed Arnoldi basis."""

    def __init__(self, basis: KrylovBasis):
        self.basis = basis
        self.dims = [basis.m]
        self._cache = {}

    def A(self, v):
        return projected_apply(self.basis, v)

    def psi(self, w, hg, v, key=None):
        V = self.basis.V
        ck = (w.j, w.p_row, hg)
        if ck not in self._cache:
            self._cache[ck] = psi_matrix(w, self.basis.H, hg)
        coords = V.T @ v
        return float(w.p_tilde) * (v - V @ coords) + V @ (self._cache[ck] @ coords)


class _ClassicalOps:
    """A_n = J_n applied matrix-free; psi actions by adaptive Arnoldi on each vector."""

    def __init__(self, op: LinearOperator, tol: float, m_max: int, tau: float):
        self.op = op
        self.tol = tol
        self.m_max = m_max
        self.tau = tau
        self.dims = []
        self._bases = {}

    def A(self, v):
        return self.op(v)

    def _basis(self, v, key):
        if key is not None and key in self._bases:
            return self._bases[key]
        basis = arnoldi(self.op, v, Adaptive(self.tol, self.m_max, max(self.tau, 1e-300)))
        if not basis.converged:
            raise StepFailure(f"Arnoldi did not reach tolerance {self.tol:g} within {self.m_max} vectors")
        self.dims.append(basis.m)
        if key is not None:
            self._bases[key] = basis
        return basis

    def psi(self, w, hg, v, key=None):
        if hg == 0.0:
            return float(w.p_tilde) * v
        if not np.any(v):
            return np.zeros_like(v)
        basis = self._basis(v, key)
        e1 = np.zeros(basis.m)
        e1[0] = 1.0
        phis = phi_chain_action(hg * basis.H, e1, w.j)
        small = np.zeros(basis.m)
        for k, c in enumerate(w.p_row, start=1):
            if c:
                small += float(c) * phis[k - 1]
        return basis.beta * (basis.V @ small)


def _make_ops(problem, y, f0, h, tab, mode):
    n = problem.dim
    if isinstance(mode, Given):
        return _DenseOps(np.asarray(mode.matrix, dtype=float))
    if isinstance(mode, Zero):
        return _ScalarOps(0.0)
    if isinstance(mode, Identity):
        return _ScalarOps(1.0)
    if isinstance(mode, Diagonal):
        return _DiagOps(np.asarray(problem.jac_diag(y), dtype=float))
    op = LinearOperator(n, lambda v: problem.jac_vp(y, v))
    if isinstance(mode, KrylovProjected):
        if not np.any(f0):
            return _ScalarOps(0.0)
        return _ProjectedOps(arnoldi(op, f0, Fixed(mode.m)))
    tau = h * max(abs(float(x)) for row in tab.g for x in row)
    if isinstance(mode, ClassicalAdaptive):
        return _ClassicalOps(op, mode.tol, min(mode.m_max, n), tau)
    if isinstance(mode, ExactDense):
        if n <= DENSE_PSI_LIMIT and problem.jac_dense is not None:
            return _DenseOps(np.asarray(problem.jac_dense(y), dtype=float))
        return _ClassicalOps(op, mode.fallback_tol, min(mode.fallback_m_max, n), tau)
    raise TypeError(f"unknown Jacobian mode {mode!r}")


def _weights(tab: Tableau):
    return {j: PsiWeights.from_tableau_row(tab.p, j) for j in range(1, tab.s + 1)}


def _binomial_difference(j: int, seq):
    """sum_{k=0..j} (-1)^k C(j,k) seq[j-k]."""
    out = np.zeros_like(seq[0])
    for k in range(j + 1):
        out += (-1) ** k * comb(j, k) * seq[j - k]
    return out


# steppers -------------------------------------------------------------------


def epirk_w_step(problem, y, h: float, tab: Tableau, mode=None) -> StepResult:
    """One step of the EPIRK-W scheme with the Jacobian approximation ``mode``."""
    if h <= 0:
        raise ValueError("step size must be positive")
    mode = default_mode(tab) if mode is None else mode
    y = np.asarray(y, dtype=float)
    s = tab.s
    W = _weights(tab)
    a = tab.float_rows("a")
    g = tab.float_rows("g")
    b = [float(x) for x in tab.b]
    bh = [float(x) for x in tab.b_hat]

    f0 = problem.f(y)
    _finite(f0)
    try:
        ops = _make_ops(problem, y, f0, h, tab, mode)
    except MatrixFunctionError as exc:
        raise StepFailure(str(exc)) from exc
    hf0 = h * f0
    r = [np.zeros_like(y)]  # r(Y_0) = 0
    diffs = {}

    def vec(j):
        if j == 1:
            return hf0
        if j - 1 not in diffs:
            diffs[j - 1] = h * _binomial_difference(j - 1, r)
        return diffs[j - 1]

    def psi_terms(row_g, active):
        try:
            return {j: ops.psi(W[j], h * row_g[j - 1], vec(j), key=j) for j in active}
        except MatrixFunctionError as exc:
            raise StepFailure(str(exc)) from exc

    stages = [y]
    for i in range(1, s):
        row = a[i - 1]
        T = psi_terms(g[i - 1], [j for j in range(1, i + 1) if row[j - 1] != 0.0])
        dY = np.zeros_like(y)
        for j, t in T.items():
            dY += row[j - 1] * t
        Y = y + dY
        _finite(Y)
        fY = problem.f(Y)
        _finite(fY)
        r.append(fY - f0 - ops.A(dY))
        stages.append(Y)

    T = psi_terms(g[s - 1], [j for j in range(1, s + 1) if b[j - 1] != 0.0 or bh[j - 1] != 0.0])
    dy = np.zeros_like(y)
    dy_emb = np.zeros_like(y)
    for j, t in T.items():
        dy += b[j - 1] * t
        dy_emb += bh[j - 1] * t
    _finite(dy, dy_emb)
    return StepResult(y + dy, y + dy_emb, dy, dy_emb, stages, list(ops.dims))


def epirk_k_step(problem, y, h: float, tab: Tableau, m: int) -> StepResult:
    """One EPIRK-K step: a single Arnoldi projection, all psi work in the reduced space."""
    if h <= 0:
        raise ValueError("step size must be positive")
    y = np.asarray(y, dtype=float)
    s = tab.s
    W = _weights(tab)
    a = tab.float_rows("a")
    g = tab.float_rows("g")
    b = [float(x) for x in tab.b]
    bh = [float(x) for x in tab.b_hat]
    pt = {j: float(W[j].p_tilde) for j in W}

    f0 = problem.f(y)
    _finite(f0)
    if not np.any(f0):
        z = np.zeros_like(y)
        return StepResult(y.copy(), y.copy(), z, z.copy(), [y] * s, [0])
    basis = arnoldi(LinearOperator(problem.dim, lambda v: problem.jac_vp(y, v)), f0, Fixed(m))
    V, H = basis.V, basis.H

    # Reduced and complementary quantities are stored relative to step start:
    # delta_i = lambda_i - lambda_0, red_i = (eta_i - H lambda_i) - (eta_0 - H lambda_0),
    # perp_i = (f_i - V eta_i) - (f_0 - V eta_0). The alternating binomial sums
    # are unchanged and y never has to be split into V lambda_0 + rest.
    eta0 = V.T @ f0
    red = [np.zeros_like(eta0)]
    perp = [np.zeros_like(y)]
    perp0 = f0 - V @ eta0
    psiH = {}
    d_cache, r_cache = {}, {}

    def psi_small(j, hg, v):
        key = (j, hg)
        if key not in psiH:
            try:
                psiH[key] = psi_matrix(W[j], H, hg)
            except MatrixFunctionError as exc:
                raise StepFailure(str(exc)) from exc
        return psiH[key] @ v

    def reduced_vec(j):
        if j == 1:
            return eta0
        if j - 1 not in d_cache:
            d_cache[j - 1] = _binomial_difference(j - 1, red)
        return d_cache[j - 1]

    def perp_vec(j):
        if j == 1:
            return perp0
        if j - 1 not in r_cache:
            r_cache[j - 1] = _binomial_difference(j - 1, perp)
        return r_cache[j - 1]

    def assemble(weights, products):
        """(lambda_i - lambda_0, Y_i - y_n)"""
        delta = np.zeros_like(eta0)
        dY = np.zeros_like(y)
        for j, P in products.items():
            c = h * weights[j - 1]
            if c == 0.0:
                continue
            delta += c * P
            dY += c * pt[j] * perp_vec(j)
        return delta, dY + V @ delta

    stages = [y]
    for i in range(1, s):
        row = a[i - 1]
        P = {j: psi_small(j, h * g[i - 1][j - 1], reduced_vec(j)) for j in range(1, i + 1) if row[j - 1] != 0.0}
        delta, dY = assemble(row, P)
        Y = y + dY
        _finite(Y)
        fY = problem.f(Y)
        _finite(fY)
        df = fY - f0
        deta = V.T @ df
        red.append(deta - H @ delta)
        perp.append(df - V @ deta)
        stages.append(Y)

    active = [j for j in range(1, s + 1) if b[j - 1] != 0.0 or bh[j - 1] != 0.0]
    P = {j: psi_small(j, h * g[s - 1][j - 1], reduced_vec(j)) for j in active}
    _, dy = assemble(b, P)
    _, dy_emb = assemble(bh, P)
    _finite(dy, dy_emb)
    return StepResult(y + dy, y + dy_emb, dy, dy_emb, stages, [basis.m], basis.breakdown)


def make_stepper(tab: Tableau, mode=None):
    """Return step(problem, y, h) for a tableau and Jacobian mode."""
    mode = default_mode(tab) if mode is None else mode
    if tab.family == "K" and tab.execution == "native" and isinstance(mode, KrylovProjected):
        return lambda problem, y, h: epirk_k_step(problem, y, h, tab, mode.m)
    return lambda problem, y, h: epirk_w_step(problem, y, h, tab, mode)


# drivers ------------------------------------------------------------------


@dataclass
class RunStats:
    accepted: int = 0
    rejected: int = 0
    krylov_dims: list = field(default_factory=list)
    nf: int = 0
    njvp: int = 0
    njac: int = 0
    cpu_seconds: float = 0.0

    @property
    def krylov_rms(self) -> float:
        """Root mean square basis size over all projections (0 when none were made)."""
        if not self.krylov_dims:
            return 0.0
        d = np.asarray(self.krylov_dims, dtype=float)
        return float(np.sqrt(np.mean(d**2)))


@dataclass
class IntegrationResult:
    y: np.ndarray
    t: float
    stats: RunStats
    times: list = field(default_factory=list, repr=False)


# below this the embedded difference is pure roundoff and can be exactly zero
RTOL_FLOOR = 100 * np.finfo(float).eps


@dataclass(frozen=True)
class ControllerConfig:
    atol: float = 1e-6
    rtol: float = 1e-6
    safety: float = 0.9
    fac_min: float = 0.2
    fac_max: float = 5.0
    h0: Optional[float] = None
    h_min: float = 1e-14
    h_max: float = math.inf
    max_rejects_per_step: int = 20
    max_steps: int = 10**7

    def __post_init__(self):
        if not 0 < self.fac_min < 1 < self.fac_max:
            raise ValueError("controller needs 0 < fac_min < 1 < fac_max")
        if self.atol < 0 or self.rtol < 0 or self.atol + self.rtol == 0:
            raise ValueError("tolerances must be non-negative and not both zero")
        if 0 < self.rtol < RTOL_FLOOR:
            raise ValueError(f"rtol below {RTOL_FLOOR:.3g} cannot be resolved in double precision")
        if not 0 < self.safety <= 1:
            raise ValueError("safety factor must lie in (0, 1]")


def error_norm(y1, y_hat, atol: float, rtol: float) -> float:
    """sqrt(mean(((y1 - y_hat) / (atol + rtol |y1|))^2))."""
    sc = atol + rtol * np.abs(y1)
    return float(np.sqrt(np.mean(((y1 - y_hat) / sc) ** 2)))


def _compensated_add(y, comp, dy):
    """Kahan update of y + dy; comp carries the bits lost in earlier additions."""
    dy = dy - comp
    t = y + dy
    return t, (t - y) - dy


def integrate_fixed(problem, y0, t0: float, tf: float, h: float, tab: Tableau, mode=None,
                    max_steps: int = 10**7) -> IntegrationResult:
    """Constant steps of size h (the count is rounded so the last step lands on tf)."""
    span = tf - t0
    if h <= 0:
        raise ValueError("step size must be positive")
    y = np.array(y0, dtype=float)
    counted = _Counted(problem)
    stats = RunStats()
    if span == 0:
        return IntegrationResult(y, t0, stats, [t0])
    n = max(1, int(round(span / h)))
    if n > max_steps:
        raise IntegrationError(f"{n} steps exceed the limit of {max_steps}")
    hh = span / n
    step = make_stepper(tab, mode)
    comp = np.zeros_like(y)
    start = time.perf_counter()
    for k in range(n):
        try:
            res = step(counted, y, hh)
        except StepFailure as exc:
            raise IntegrationError(f"step {k} at t={t0 + k * hh:g} failed: {exc}") from exc
        y, comp = _compensated_add(y, comp, res.dy)
        stats.accepted += 1
        stats.krylov_dims.extend(res.krylov_dims)
    stats.cpu_seconds = time.perf_counter() - start
    stats.nf, stats.njvp, stats.njac = counted.nf, counted.njvp, counted.njac
    return IntegrationResult(y, tf, stats, [t0 + k * hh for k in range(n + 1)])


def integrate_adaptive(problem, y0, t0: float, tf: float, tab: Tableau, mode=None,
                       cfg: ControllerConfig | None = None) -> IntegrationResult:
    """Embedded-pair step size control.

    A step is accepted when the weighted RMS difference between the main and
    embedded solutions is at most 1; the next step is scaled by
    safety * err^(-1/(p_hat+1)) clipped to [fac_min, fac_max]. Steps with
    non-finite values count as rejections and halve h.
    """
    cfg = cfg or ControllerConfig()
    span = tf - t0
    y = np.array(y0, dtype=float)
    counted = _Counted(problem)
    stats = RunStats()
    times = [t0]
    if span == 0:
        return IntegrationResult(y, t0, stats, times)
    if span < 0:
        raise ValueError("integration runs forward in time only")
    step = make_stepper(tab, mode)
    expo = 1.0 / (tab.embedded_order + 1)
    h = min(cfg.h0 if cfg.h0 is not None else 1e-3 * span, cfg.h_max, span)
    t = t0
    comp = np.zeros_like(y)
    start = time.perf_counter()
    rejects = 0
    while t < tf:
        if stats.accepted + stats.rejected >= cfg.max_steps:
            raise IntegrationError(f"step limit {cfg.max_steps} reached at t={t:g}")
        last = t + h >= tf - 1e-12 * span
        hh = tf - t if last else h
        try:
            res = step(counted, y, hh)
            stats.krylov_dims.extend(res.krylov_dims)
            err = error_norm(res.y_next, res.y_embedded, cfg.atol, cfg.rtol)
        except StepFailure:
            err = math.inf
        if err <= 1.0:
            y, comp = _compensated_add(y, comp, res.dy)
            t = tf if last else t + hh
            times.append(t)
            stats.accepted += 1
            rejects = 0
            fac = cfg.fac_max if err == 0 else min(cfg.fac_max, max(cfg.fac_min, cfg.safety * err**-expo))
            h = min(hh * fac, cfg.h_max)
        else:
            stats.rejected += 1
            rejects += 1
            if rejects > cfg.max_rejects_per_step:
                raise IntegrationError(f"more than {cfg.max_rejects_per_step} rejections at t={t:g}")
            fac = 0.5 if not math.isfinite(err) else min(1.0, max(cfg.fac_min, cfg.safety * err**-expo))
            h = hh * fac
            if h < cfg.h_min:
                raise IntegrationError(f"step size {h:g} below h_min at t={t:g}")
    stats.cpu_seconds = time.perf_counter() - start
    stats.nf, stats.njvp, stats.njac = counted.nf, counted.njvp, counted.njac
    return IntegrationResult(y, t, stats, times)
