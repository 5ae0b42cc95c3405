"""Sparse multivariate polynomials with rational coefficients.

Just enough of a ring for order-condition generation: +, -, *, integer
powers, evaluation at rational points and a plain-text printer. Variables
are strings such as ``"a[2][1]"``.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

__all__ = ["Poly", "var", "as_poly"]

# A monomial is a sorted tuple of (variable, exponent) pairs.
Monomial = tuple


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for v, e in m2:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items(), key=lambda it: _var_key(it[0])))


def _var_key(name: str):
    # a[10][2] sorts after a[9][2]
    head, _, rest = name.partition("[")
    idx = tuple(int(x) for x in rest.replace("]", " ").replace("[", " ").split()) if rest else ()
    return head, idx


class Poly:
    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms: dict[Monomial, Fraction] = {}
        if terms:
            for m, c in terms.items():
                if c:
                    self.terms[m] = Fraction(c)

    @classmethod
    def const(cls, c) -> "Poly":
        return cls({(): Fraction(c)})

    # ring operations
    def __add__(self, other):
        other = as_poly(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return Poly._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly._raw({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = as_poly(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return Poly()
            return Poly._raw({m: c * other for m, c in self.terms.items()})
        other = as_poly(other)
        if other is NotImplemented:
            return NotImplemented
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                s = out.get(m, 0) + c1 * c2
                if s:
                    out[m] = s
                else:
                    out.pop(m, None)
        return Poly._raw(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        return NotImplemented

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        out = Poly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        other = as_poly(other)
        if other is NotImplemented:
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    @classmethod
    def _raw(cls, terms):
        p = cls.__new__(cls)
        p.terms = terms
        return p

    # inspection
    @property
    def variables(self) -> set[str]:
        return {v for m in self.terms for v, _ in m}

    def constant_term(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def is_constant(self) -> bool:
        return all(m == () for m in self.terms)

    def evaluate(self, values: dict):
        """Substitute every variable; values may be Fractions, ints or floats."""
        total = 0
        for m, c in self.terms.items():
            t = c
            for v, e in m:
                try:
                    t = t * values[v] ** e
                except KeyError:
                    raise KeyError(f"no value for variable {v}") from None
            total = total + t
        return total

    def substitute(self, values: dict) -> "Poly":
        """Partial substitution; unknown variables stay symbolic."""
        out = Poly()
        for m, c in self.terms.items():
            t = Poly.const(c)
            for v, e in m:
                if v in values:
                    t = t * (as_poly(values[v]) ** e)
                else:
                    t = t * Poly._raw({((v, e),): Fraction(1)})
            out = out + t
        return out

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=lambda mm: (-sum(e for _, e in mm), [(_var_key(v), e) for v, e in mm])):
            c = self.terms[m]
            factors = [v if e == 1 else f"{v}^{e}" for v, e in m]
            mag = abs(c)
            if factors:
                body = "*".join(factors)
                body = body if mag == 1 else f"{mag}*{body}"
            else:
                body = str(mag)
            parts.append(("-" if c < 0 else "+", body))
        sign, body = parts[0]
        text = ("-" if sign == "-" else "") + body
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    def __repr__(self):
        return f"Poly({self})"


def var(name: str) -> Poly:
    return Poly._raw({((name, 1),): Fraction(1)})


def as_poly(x):
    if isinstance(x, Poly):
        return x
    if isinstance(x, (int, Fraction)) or isinstance(x, Rational):
        return Poly.const(x)
    return NotImplemented
