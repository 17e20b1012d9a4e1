"""
Independent reference computations: quadrature engines and the self-test suite
"""

from .quadrature import (
    adaptive_gaussian_ambiguity,
    adaptive_gaussian_inner,
    halving_check,
    tf_inner_product,
    uniform_grid,
)

__all__ = [
    "adaptive_gaussian_ambiguity",
    "adaptive_gaussian_inner",
    "halving_check",
    "tf_inner_product",
    "uniform_grid",
]
