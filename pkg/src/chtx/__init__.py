"""Numerical laboratory for whole-space chemotaxis systems with logistic source."""

from .model import Field, Grid, ModelSpec, State, Variant, rhs_u, rhs_v
from .operators import SpectralPlan
from .solver import Classification, Scheme, SolverConfig, picard_mild, run, step
from .thresholds import check_conditions, cgamma_bound, cstar_lower, dstar, sigma

__version__ = "0.1.0"

__all__ = [
    "Classification", "Field", "Grid", "ModelSpec", "Scheme", "SolverConfig",
    "SpectralPlan", "State", "Variant", "cgamma_bound", "check_conditions",
    "cstar_lower", "dstar", "picard_mild", "rhs_u", "rhs_v", "run", "sigma", "step",
]
