"""Discrete fractional derivatives and numerical checks of their algebraic rules."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    FractionalOrder,
    Grid,
    SampledFunction,
    WeierstrassParams,
    deterministic_sum,
    gamma,
    make_grid,
    sample,
)
from .operators import (  # noqa: E402
    OperatorKind,
    OperatorSpec,
    frac_derivative,
    gl_weights,
    local_frac_derivative,
)
from .analysis import (  # noqa: E402
    hadamard_decompose,
    hadamard_g2,
    holder_condition_check,
    holder_estimate,
    product_holder_check,
    weierstrass,
    weierstrass_sample,
)
from .rules import (  # noqa: E402
    ConvergenceReport,
    RuleReport,
    convergence_study,
    leibniz_defect,
    modified_chain_residual,
    remainder_vanishing_check,
    scale_property_residual,
    theorem_chain_residual,
)

__all__ = [
    "ConvergenceReport",
    "FractionalOrder",
    "Grid",
    "OperatorKind",
    "OperatorSpec",
    "RuleReport",
    "SampledFunction",
    "WeierstrassParams",
    "convergence_study",
    "deterministic_sum",
    "frac_derivative",
    "gamma",
    "gl_weights",
    "hadamard_decompose",
    "hadamard_g2",
    "holder_condition_check",
    "holder_estimate",
    "leibniz_defect",
    "local_frac_derivative",
    "make_grid",
    "modified_chain_residual",
    "product_holder_check",
    "remainder_vanishing_check",
    "sample",
    "scale_property_residual",
    "theorem_chain_residual",
    "weierstrass",
    "weierstrass_sample",
]
