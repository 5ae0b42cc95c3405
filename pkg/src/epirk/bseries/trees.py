"""Two-coloured rooted trees (meagre = f and its derivatives, fat = A_n).

TW-trees: every leaf is meagre and every fat vertex has exactly one child.
TK-trees: TW-trees in which no linear subtree has a fat root.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import groupby
from math import factorial

__all__ = [
    "ColoredTree",
    "MEAGRE",
    "FAT",
    "tree",
    "parse_tree",
    "enumerate_tw_trees",
    "enumerate_tk_trees",
    "enumerate_t_trees",
    "density",
    "symmetry",
    "is_tk",
    "recolor_linear",
    "recolor_all",
    "TW_CATALOGUE",
    "K_NAMES",
    "tree_name",
]

MEAGRE = False
FAT = True


@dataclass(frozen=True, eq=True)
class ColoredTree:
    fat: bool
    children: tuple = ()

    def __post_init__(self):
        kids = tuple(sorted(self.children, key=lambda t: t.key))
        object.__setattr__(self, "children", kids)

    @cached_property
    def key(self):
        return (self.order, self.fat, tuple(c.key for c in self.children))

    @cached_property
    def order(self) -> int:
        return 1 + sum(c.order for c in self.children)

    @property
    def is_linear(self) -> bool:
        t = self
        while t.children:
            if len(t.children) > 1:
                return False
            t = t.children[0]
        return True

    @property
    def has_fat(self) -> bool:
        return self.fat or any(c.has_fat for c in self.children)

    def is_tw(self) -> bool:
        if self.fat and len(self.children) != 1:
            return False
        return all(c.is_tw() for c in self.children)

    def __lt__(self, other):
        return self.key < other.key

    def __str__(self):
        head = "f" if self.fat else "m"
        if not self.children:
            return head
        return head + "[" + ",".join(str(c) for c in self.children) + "]"

    __repr__ = __str__


def tree(fat: bool, *children: ColoredTree) -> ColoredTree:
    return ColoredTree(fat, tuple(children))


def parse_tree(text: str) -> ColoredTree:
    """Parse the bracket notation used by ``str``: ``m[m,f[m]]``."""
    text = text.replace(" ", "")
    pos = 0

    def node():
        nonlocal pos
        c = text[pos]
        if c not in "mf":
            raise ValueError(f"bad tree string {text!r} at {pos}")
        pos += 1
        kids = []
        if pos < len(text) and text[pos] == "[":
            pos += 1
            while True:
                kids.append(node())
                if text[pos] == ",":
                    pos += 1
                    continue
                if text[pos] == "]":
                    pos += 1
                    break
        return ColoredTree(c == "f", tuple(kids))

    t = node()
    if pos != len(text):
        raise ValueError(f"trailing characters in tree string {text!r}")
    return t


def _partitions(n: int, max_part: int | None = None):
    """Partitions of n as non-increasing tuples."""
    if max_part is None:
        max_part = n
    if n == 0:
        yield ()
        return
    for first in range(min(n, max_part), 0, -1):
        for rest in _partitions(n - first, first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _tw_of_order(n: int) -> tuple[ColoredTree, ...]:
    if n == 1:
        return (ColoredTree(MEAGRE),)
    found = {}
    # fat root: exactly one child of order n-1
    for c in _tw_of_order(n - 1):
        t = ColoredTree(FAT, (c,))
        found[t.key] = t
    # meagre root: any multiset of children with total order n-1
    for parts in _partitions(n - 1):
        for kids in _child_choices(parts):
            t = ColoredTree(MEAGRE, kids)
            found[t.key] = t
    return tuple(sorted(found.values(), key=lambda t: t.key))


def _child_choices(parts):
    if not parts:
        yield ()
        return
    first, rest = parts[0], parts[1:]
    for c in _tw_of_order(first):
        for others in _child_choices(rest):
            yield (c,) + others


def enumerate_tw_trees(max_order: int) -> list[ColoredTree]:
    """All TW-trees up to ``max_order``, catalogue order first where one exists."""
    if not 1 <= max_order <= 6:
        raise ValueError("max_order must lie in 1..6")
    out = []
    for n in range(1, max_order + 1):
        out.extend(sorted(_tw_of_order(n), key=lambda t: (_W_INDEX.get(t.key, 10**6), t.key)))
    return out


def is_tk(t: ColoredTree) -> bool:
    if t.fat and t.is_linear:
        return False
    return all(is_tk(c) for c in t.children)


def enumerate_tk_trees(max_order: int) -> list[ColoredTree]:
    return [t for t in enumerate_tw_trees(max_order) if is_tk(t)]


def enumerate_t_trees(max_order: int) -> list[ColoredTree]:
    """Classical (all-meagre) Butcher trees."""
    return [t for t in enumerate_tw_trees(max_order) if not t.has_fat]


@lru_cache(maxsize=None)
def density(t: ColoredTree) -> int:
    """gamma(t): product of subtree orders over all vertices."""
    out = t.order
    for c in t.children:
        out *= density(c)
    return out


@lru_cache(maxsize=None)
def symmetry(t: ColoredTree) -> int:
    """sigma(t): order of the automorphism group."""
    out = 1
    for _, grp in groupby(t.children, key=lambda c: c.key):
        grp = list(grp)
        out *= factorial(len(grp)) * symmetry(grp[0]) ** len(grp)
    return out


def recolor_linear(t: ColoredTree) -> ColoredTree:
    """Recolour every linear subtree meagre (the TW -> TK map)."""
    if t.is_linear:
        return _all_meagre(t)
    return ColoredTree(t.fat, tuple(recolor_linear(c) for c in t.children))


def recolor_all(t: ColoredTree) -> ColoredTree:
    """Recolour every vertex meagre (A_n = J_n collapses TW onto T)."""
    return _all_meagre(t)


def _all_meagre(t: ColoredTree) -> ColoredTree:
    return ColoredTree(MEAGRE, tuple(_all_meagre(c) for c in t.children))


# Trees in the order of the published TW tables, with their TK names.
TW_CATALOGUE = (
    "m",
    "m[m]",
    "f[m]",
    "m[m,m]",
    "m[m[m]]",
    "m[f[m]]",
    "f[m[m]]",
    "f[f[m]]",
    "m[m,m,m]",
    "m[m,m[m]]",
    "m[m,f[m]]",
    "m[m[m,m]]",
    "f[m[m,m]]",
    "m[m[m[m]]]",
    "m[m[f[m]]]",
    "m[f[m[m]]]",
    "m[f[f[m]]]",
    "f[m[m[m]]]",
    "f[m[f[m]]]",
    "f[f[m[m]]]",
    "f[f[f[m]]]",
)
K_NAMES = {1: 1, 2: 2, 4: 3, 5: 4, 9: 5, 10: 6, 12: 7, 13: 8, 14: 9}

_W_INDEX = {parse_tree(s).key: i for i, s in enumerate(TW_CATALOGUE, start=1)}
_K_INDEX = {parse_tree(TW_CATALOGUE[w - 1]).key: k for w, k in K_NAMES.items()}


def tree_name(t: ColoredTree, family: str = "W") -> str:
    """Published label such as ``tauW14`` or ``tauK8``; falls back to the bracket form."""
    if family == "K" and t.key in _K_INDEX:
        return f"tauK{_K_INDEX[t.key]}"
    if t.key in _W_INDEX:
        return f"tauW{_W_INDEX[t.key]}"
    return str(t)


def exact_weight(t: ColoredTree) -> Fraction:
    return Fraction(1, density(t))
