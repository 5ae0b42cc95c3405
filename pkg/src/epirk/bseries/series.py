"""Truncated B-series over TW-trees and the EPIRK-W stage recursion.

Convention: B(a, y) = a(empty) y + sum_t a(t) h^|t| / sigma(t) F(t)(y).
Under this normalisation h f(B(a, y)) has coefficient prod a(t_i) on a
meagre root with children t_i, and h A B(a, y) maps a(t) onto the fat
tree whose only child is t.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial

from .poly import Poly, var
from .trees import ColoredTree, FAT, MEAGRE, enumerate_tw_trees, exact_weight

__all__ = [
    "BSeries",
    "SymbolicTableau",
    "compose_f",
    "multiply_A",
    "multiply_psi",
    "psi_taylor_coefficients",
    "remainder_series",
    "forward_difference",
    "numerical_solution_series",
    "exact_solution_series",
]


@dataclass
class BSeries:
    """Map from canonical trees to coefficients, truncated at ``max_order``."""

    max_order: int
    coeffs: dict = field(default_factory=dict)
    empty: object = 0

    @classmethod
    def identity(cls, max_order: int) -> "BSeries":
        """Series of y_n itself: empty tree 1, everything else 0."""
        return cls(max_order, {}, 1)

    @classmethod
    def zero(cls, max_order: int) -> "BSeries":
        return cls(max_order, {}, 0)

    def __getitem__(self, t: ColoredTree):
        return self.coeffs.get(t, 0)

    def __setitem__(self, t: ColoredTree, value):
        if t.order > self.max_order:
            return
        self.coeffs[t] = value

    def trees(self):
        return list(self.coeffs)

    def _combine(self, other: "BSeries", sign: int) -> "BSeries":
        order = min(self.max_order, other.max_order)
        out = dict((t, c) for t, c in self.coeffs.items() if t.order <= order)
        for t, c in other.coeffs.items():
            if t.order <= order:
                out[t] = out.get(t, 0) + sign * c
        return BSeries(order, out, self.empty + sign * other.empty)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def scale(self, c) -> "BSeries":
        return BSeries(self.max_order, {t: c * v for t, v in self.coeffs.items()}, c * self.empty)

    def __rmul__(self, c):
        return self.scale(c)

    def is_zero(self) -> bool:
        return not _nonzero(self.empty) and not any(_nonzero(v) for v in self.coeffs.values())


def _nonzero(c) -> bool:
    return bool(c)


def _product(values):
    out = 1
    for v in values:
        out = out * v
        if not _nonzero(out):
            return 0
    return out


def compose_f(s: BSeries) -> BSeries:
    """Coefficients of h f(B(s, y)); requires s(empty) = 1."""
    if s.empty != 1:
        raise ValueError("composition with f needs a series with unit empty-tree coefficient")
    out = BSeries.zero(s.max_order)
    for t in enumerate_tw_trees(s.max_order):
        if t.fat:
            continue
        out[t] = _product(s[c] for c in t.children) if t.children else 1
    return out


def multiply_A(s: BSeries) -> BSeries:
    """Coefficients of h A_n B(s, y); requires s(empty) = 0."""
    if _nonzero(s.empty):
        raise ValueError("h A_n acts only on series without a y term")
    out = BSeries.zero(s.max_order)
    for t, c in s.coeffs.items():
        if t.order < s.max_order:
            out[ColoredTree(FAT, (t,))] = c
    return out


def psi_taylor_coefficients(p_row, g, count: int):
    """c_i = g^i * sum_k p[k] / (i+k)!  for i < count."""
    cs = []
    for i in range(count):
        acc = 0
        for k, pk in enumerate(p_row, start=1):
            acc = acc + pk * Fraction(1, factorial(i + k))
        cs.append((g**i) * acc if i else acc)
    return cs


def multiply_psi(s: BSeries, p_row, g) -> BSeries:
    """Coefficients of psi(h g A_n) B(s, y) with psi = sum_k p_row[k-1] phi_k."""
    cs = psi_taylor_coefficients(p_row, g, s.max_order)
    out = s.scale(cs[0])
    term = s
    for c in cs[1:]:
        term = multiply_A(term)
        if term.is_zero():
            break
        out = out + term.scale(c)
    return out


def remainder_series(stage: BSeries, base: BSeries) -> BSeries:
    """h r(Y) = h f(Y) - h f(y_n) - h A_n (Y - y_n)."""
    return compose_f(stage) - compose_f(base) - multiply_A(stage - base)


def forward_difference(j: int, stage_series: list, base: BSeries) -> BSeries:
    """h Delta^(j) r(y_n) = sum_k (-1)^k C(j,k) h r(Y_{j-k}), with r(Y_0) = 0.

    ``stage_series[i]`` is the series of Y_i; entry 0 is y_n.
    """
    if j < 1:
        raise ValueError("difference order starts at 1")
    out = BSeries.zero(base.max_order)
    for k in range(j):
        idx = j - k
        coeff = (-1) ** k * comb(j, k)
        out = out + remainder_series(stage_series[idx], base).scale(coeff)
    return out


@dataclass(frozen=True)
class SymbolicTableau:
    """Tableau whose entries are polynomial variables a[i][j], b[j], g[i][j], p[j][k]."""

    s: int

    @property
    def a(self):
        return [[var(f"a[{i}][{j}]") for j in range(1, self.s + 1)] for i in range(1, self.s)]

    @property
    def b(self):
        return [var(f"b[{j}]") for j in range(1, self.s + 1)]

    @property
    def g(self):
        return [[var(f"g[{i}][{j}]") for j in range(1, self.s + 1)] for i in range(1, self.s + 1)]

    @property
    def p(self):
        return [
            [var(f"p[{j}][{k}]") if k <= j else 0 for k in range(1, self.s + 1)] for j in range(1, self.s + 1)
        ]


def _check_dims(tab, s: int):
    a, b, g, p = tab.a, tab.b, tab.g, tab.p
    ok = (
        len(a) == s - 1
        and all(len(row) >= s - 1 for row in a)
        and len(b) == s
        and len(g) == s
        and all(len(row) == s for row in g)
        and len(p) == s
        and all(len(row) >= j + 1 for j, row in enumerate(p))
    )
    if not ok:
        raise ValueError(f"tableau dimensions inconsistent with s={s}")


def numerical_solution_series(tab, max_order: int = 4, weights=None) -> BSeries:
    """B-series of one EPIRK-W step, built stage by stage.

    ``tab`` exposes ``s`` and 0-based ``a``, ``b``, ``g``, ``p`` rows whose
    entries live in any ring supporting + and * with Fractions. ``weights``
    replaces ``b`` (used for embedded solutions).
    """
    s = tab.s
    _check_dims(tab, s)
    a, g, p = tab.a, tab.g, tab.p
    b = tab.b if weights is None else weights
    if len(b) != s:
        raise ValueError("weight vector length must equal the stage count")

    yn = BSeries.identity(max_order)
    hf = compose_f(yn)
    stages = [yn]

    def combine(row_w, row_g):
        i = len(stages)  # number of available stages incl. y_n
        u = multiply_psi(hf, p[0][:1], row_g[0]).scale(row_w[0])
        for j in range(2, i + 1):
            if not _nonzero(row_w[j - 1]):
                continue
            v = forward_difference(j - 1, stages, yn)
            v = multiply_psi(v, p[j - 1][:j], row_g[j - 1])
            u = u + v.scale(row_w[j - 1])
        return u

    for i in range(1, s):
        stages.append(yn + combine(a[i - 1], g[i - 1]))
    return yn + combine(b, g[s - 1])


def exact_solution_series(max_order: int = 4) -> BSeries:
    """1/gamma(t) on all-meagre trees, 0 on any tree with a fat vertex."""
    out = BSeries.identity(max_order)
    for t in enumerate_tw_trees(max_order):
        out[t] = 0 if t.has_fat else exact_weight(t)
    return out
