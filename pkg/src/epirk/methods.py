"""Coefficient sets of the shipped EPIRK schemes, stored as exact rationals."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .bseries.conditions import order_conditions

__all__ = [
    "Tableau",
    "ValidationReport",
    "tableau_epirkw3a",
    "tableau_epirkw3b",
    "tableau_epirkk4",
    "get_method",
    "METHODS",
    "validate_tableau",
]


def _frac_rows(rows):
    return tuple(tuple(Fraction(x) for x in row) for row in rows)


@dataclass(frozen=True)
class Tableau:
    """Coefficients of an s-stage EPIRK scheme.

    ``a`` has s-1 rows of length s, ``g`` and ``p`` are s-by-s with ``p``
    lower triangular. ``family`` is "W", "K" or "classical"; ``order`` and
    ``embedded_order`` are the design orders under that family.
    """

    name: str
    s: int
    a: tuple
    b: tuple
    b_hat: tuple
    g: tuple
    p: tuple
    family: str
    order: int
    embedded_order: int
    execution: str = "native"  # "native" or "classical"
    # largest residual magnitude accepted as zero; nonzero when the printed
    # coefficients are themselves rounded
    residual_tol: float = 0.0

    def __post_init__(self):
        s = self.s
        for name in ("a", "g", "p"):
            object.__setattr__(self, name, _frac_rows(getattr(self, name)))
        for name in ("b", "b_hat"):
            object.__setattr__(self, name, tuple(Fraction(x) for x in getattr(self, name)))
        if len(self.a) != s - 1 or any(len(r) != s for r in self.a):
            raise ValueError(f"{self.name}: a must be {s - 1}x{s}")
        if len(self.b) != s or len(self.b_hat) != s:
            raise ValueError(f"{self.name}: b and b_hat need {s} entries")
        for name in ("g", "p"):
            rows = getattr(self, name)
            if len(rows) != s or any(len(r) != s for r in rows):
                raise ValueError(f"{self.name}: {name} must be {s}x{s}")
        for j in range(s):
            if any(self.p[j][k] for k in range(j + 1, s)):
                raise ValueError(f"{self.name}: p must be lower triangular")
        if self.family not in ("W", "K", "classical"):
            raise ValueError(f"unknown family {self.family!r}")

    def float_rows(self, name: str):
        return [[float(x) for x in row] for row in getattr(self, name)]

    def with_name(self, name: str, **changes) -> "Tableau":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(name=name, **changes)
        return Tableau(**fields)


def tableau_epirkw3a() -> Tableau:
    # b_hat exactly as published; it misses the W order-2 conditions
    return Tableau(
        name="epirkw3a",
        s=3,
        a=[[Fraction(1, 2), 0, 0], [0, 1, 0]],
        b=[Fraction(3, 4), Fraction(1, 2), 1],
        b_hat=[Fraction(3, 4), Fraction(3, 4), Fraction(6, 5)],
        g=[[Fraction(2, 3), 0, 0], [0, 0, 0], [1, Fraction(3, 5), 0]],
        p=[[Fraction(4, 3), 0, 0], [1, 2, 0], [0, 0, Fraction(3, 4)]],
        family="W",
        order=3,
        embedded_order=2,
    )


def tableau_epirkw3b() -> Tableau:
    d = Fraction  # Fraction("0.123") is exact
    a11 = d("0.22824182961171620396")
    a21 = d("0.45648365922343240794")
    a22 = d("0.33161664063356950085")
    b2 = d("2.0931591383832578214")
    b3 = d("1.2623969257900804404")
    g2 = d("0.34706341174296320958")
    p22 = d("2.0931604100438501004")
    return Tableau(
        name="epirkw3b",
        s=3,
        a=[[a11, 0, 0], [a21, a22, 0]],
        b=[1, b2, b3],
        b_hat=[1, b2, 1],
        g=[[0, 0, 0], [g2, g2, g2], [1, 1, 1]],
        p=[[1, 0, 0], [0, p22, 0], [1, 1, 1]],
        family="W",
        order=3,
        embedded_order=2,
        residual_tol=1e-14,
    )


# printed rational approximation of sqrt(3)/2 (error about 2e-31)
_K4_B1_INV = Fraction(692665874901013, 799821658665135)


def tableau_epirkk4() -> Tableau:
    c = _K4_B1_INV
    return Tableau(
        name="epirkk4",
        s=3,
        a=[[c, 0, 0], [c, Fraction(3, 4), 0]],
        b=[1 / c, Fraction(352, 729), Fraction(64, 729)],
        b_hat=[1 / c, Fraction(32, 81), 0],
        g=[[Fraction(3, 4), 0, 0], [Fraction(3, 4), 0, 0], [1, Fraction(9, 16), Fraction(9, 16)]],
        p=[[c, 0, 0], [1, 1, 0], [1, 1, 0]],
        family="K",
        order=4,
        embedded_order=3,
        residual_tol=1e-29,
    )


def _epirkk4_classical() -> Tableau:
    return tableau_epirkk4().with_name("epirkk4-classical", execution="classical")


METHODS = {
    "epirkw3a": tableau_epirkw3a,
    "epirkw3b": tableau_epirkw3b,
    "epirkw3": tableau_epirkw3b,
    "epirkk4": tableau_epirkk4,
    "epirkk4-classical": _epirkk4_classical,
}


def get_method(name: str) -> Tableau:
    try:
        return METHODS[name]()
    except KeyError:
        raise KeyError(f"unknown method {name!r}; known: {', '.join(METHODS)}") from None


@dataclass
class ValidationReport:
    name: str
    family: str
    order: int
    embedded_order: int
    tolerance: float
    order_ok: bool = False
    embedded_ok: bool = False
    failures: list = field(default_factory=list)  # (label, tree name, residual)

    @property
    def ok(self) -> bool:
        return self.order_ok and self.embedded_ok

    def summary(self) -> str:
        lines = [
            f"{self.name}: family {self.family}, order {self.order} "
            f"{'ok' if self.order_ok else 'FAILED'}, embedded order {self.embedded_order} "
            f"{'ok' if self.embedded_ok else 'FAILED'}"
        ]
        for label, tname, r in self.failures:
            lines.append(f"  {label} {tname}: residual {float(r):.3e}")
        return "\n".join(lines)


def validate_tableau(
    tab: Tableau, family: str | None = None, order: int | None = None, tol: float | None = None
) -> ValidationReport:
    """Check design and embedded orders against generated conditions.

    Residuals are exact rationals; ``tol`` (default ``tab.residual_tol``)
    bounds what counts as zero. Never raises on a failed condition.
    """
    family = family or tab.family
    order = tab.order if order is None else order
    tol = tab.residual_tol if tol is None else tol
    rep = ValidationReport(tab.name, family, order, tab.embedded_order, tol)

    def failing(embedded, q):
        return [c for c in order_conditions(tab, q, family, embedded) if abs(c.residual) > tol]

    bad = failing(False, order)
    rep.order_ok = not bad
    rep.failures += [("main", c.name, c.residual) for c in bad]
    bad = failing(True, tab.embedded_order)
    rep.embedded_ok = not bad
    rep.failures += [("embedded", c.name, c.residual) for c in bad]
    return rep
