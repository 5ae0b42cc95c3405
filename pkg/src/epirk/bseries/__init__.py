"""B-series machinery for EPIRK order conditions."""

from .conditions import (
    FAMILIES,
    Condition,
    achieved_order,
    collapse,
    format_conditions,
    order_conditions,
    residuals,
    symbolic_conditions,
)
from .poly import Poly, as_poly, var
from .series import (
    BSeries,
    SymbolicTableau,
    compose_f,
    exact_solution_series,
    forward_difference,
    multiply_A,
    multiply_psi,
    numerical_solution_series,
    remainder_series,
)
from .trees import (
    ColoredTree,
    density,
    enumerate_t_trees,
    enumerate_tk_trees,
    enumerate_tw_trees,
    exact_weight,
    is_tk,
    parse_tree,
    recolor_all,
    recolor_linear,
    symmetry,
    tree,
    tree_name,
)
