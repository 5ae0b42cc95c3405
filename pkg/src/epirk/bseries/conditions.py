"""Order conditions for EPIRK-W, EPIRK-K and classical-Jacobian schemes.

A W-method must match the exact series on every TW-tree. When A_n is the
Krylov-projected Jacobian, TW-trees whose linear subtrees are recoloured
meagre produce the same elementary differential, so their coefficients are
added (rescaled by symmetry) and only TK-trees remain. With A_n = J_n every
tree collapses to its all-meagre shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .poly import Poly
from .series import BSeries, SymbolicTableau, exact_solution_series, numerical_solution_series
from .trees import (
    ColoredTree,
    enumerate_t_trees,
    enumerate_tk_trees,
    enumerate_tw_trees,
    recolor_all,
    recolor_linear,
    symmetry,
    tree_name,
)

__all__ = [
    "FAMILIES",
    "Condition",
    "collapse",
    "order_conditions",
    "symbolic_conditions",
    "residuals",
    "achieved_order",
    "format_conditions",
]

FAMILIES = ("W", "K", "classical")


@dataclass(frozen=True)
class Condition:
    tree: ColoredTree
    name: str
    residual: object  # Poly for symbolic tableaus, Fraction for rational ones

    @property
    def order(self) -> int:
        return self.tree.order

    def __float__(self):
        return float(self.residual)


def _family_trees(family: str, max_order: int):
    if family == "W":
        return enumerate_tw_trees(max_order), (lambda t: t)
    if family == "K":
        return enumerate_tk_trees(max_order), recolor_linear
    if family == "classical":
        return enumerate_t_trees(max_order), recolor_all
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def collapse(series: BSeries, family: str) -> dict:
    """Coefficients of ``series`` on the representative trees of ``family``."""
    reps, fold = _family_trees(family, series.max_order)
    out = {t: 0 for t in reps}
    for t in enumerate_tw_trees(series.max_order):
        c = series[t]
        if not c:
            continue
        r = fold(t)
        scale = Fraction(symmetry(r), symmetry(t))
        out[r] = out[r] + (c * scale if scale != 1 else c)
    return out


def order_conditions(tab, max_order: int, family: str = "W", embedded: bool = False) -> list[Condition]:
    """Residuals (numerical minus exact coefficient) on every tree up to ``max_order``.

    ``tab`` may hold Fractions, Polys or floats. ``embedded`` uses the
    tableau's ``b_hat`` as final weights.
    """
    weights = None
    if embedded:
        weights = getattr(tab, "b_hat", None)
        if weights is None:
            raise ValueError("tableau has no embedded weights")
    num = collapse(numerical_solution_series(tab, max_order, weights), family)
    ref = collapse(exact_solution_series(max_order), family)
    label = "K" if family == "K" else "W"
    return [Condition(t, tree_name(t, label), num[t] - ref[t]) for t in num]


def symbolic_conditions(s: int, max_order: int, family: str = "W") -> list[Condition]:
    """Order conditions of a generic s-stage scheme as polynomials in its coefficients."""
    return order_conditions(SymbolicTableau(s), max_order, family)


def residuals(tab, max_order: int, family: str = "W", embedded: bool = False) -> dict[str, float]:
    """Tree name -> absolute residual as a float."""
    return {c.name: abs(float(c.residual)) for c in order_conditions(tab, max_order, family, embedded)}


def achieved_order(tab, family: str = "W", embedded: bool = False, max_order: int = 4, tol: float = 0.0) -> int:
    """Largest p <= max_order with every residual of order <= p at most ``tol``."""
    conds = order_conditions(tab, max_order, family, embedded)
    p = 0
    for q in range(1, max_order + 1):
        if all(abs(float(c.residual)) <= tol for c in conds if c.order == q):
            p = q
        else:
            break
    return p


def format_conditions(conds: list[Condition]) -> str:
    """Plain-text dump, one condition per line: ``tauK3 (order 3): <poly> = 0``."""
    lines = []
    for c in conds:
        res = c.residual if isinstance(c.residual, Poly) else Poly.const(Fraction(c.residual))
        lines.append(f"{c.name} (order {c.order}): {res} = 0")
    return "\n".join(lines)
