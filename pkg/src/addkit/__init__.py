"""Additive processes built from time-dependent negative definite symbols."""

__version__ = "0.1.0"

from .symbols import (  # noqa: F401
    SymbolFamily,
    TimeProfile,
    coshlog,
    direct_sum,
    eval_q,
    eval_Q,
    family_from_config,
    gaussian,
    linear_profile,
    poisson,
)
from .density import (  # noqa: F401
    GridSpec,
    adjoint_density,
    adjoint_exponent,
    density_grid,
    density_point,
    log_sigma,
    sigma,
)
