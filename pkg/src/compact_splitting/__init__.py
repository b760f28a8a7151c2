"""Fourth-order compact splittings for the Schroedinger equation with a
time-dependent potential, Hermite-Birkhoff quadrature on simplices, kernel
analysis and dense reference oracles."""

from .errors import (
    CapabilityError,
    DivergenceError,
    InvalidInputError,
    OracleFailure,
    OrderingError,
    ParameterError,
    SplittingError,
)
from .operators import Grid1D, PotentialSpec, State, moving_quadratic
from .splitting import TAU_OPT, SplittingCoefficients, coefficients, evolve, step_tacb4

__all__ = [
    "CapabilityError",
    "DivergenceError",
    "Grid1D",
    "InvalidInputError",
    "OracleFailure",
    "OrderingError",
    "ParameterError",
    "PotentialSpec",
    "SplittingCoefficients",
    "SplittingError",
    "State",
    "TAU_OPT",
    "coefficients",
    "evolve",
    "moving_quadratic",
    "step_tacb4",
]
