"""Numerical laboratory for generalized Morrey spaces.

Discrete Morrey norms over ball sweeps, maximal and Riesz operators,
Poisson and p-Laplace solvers, inequality certifiers and a unique
continuation toolkit, all on uniform grids.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import (ConfigError, DivergenceError, HypothesisViolationError, InsufficientDataError,
                     InvalidInputError, MorreyLabError, NoZeroSetError, OutOfRangeError,
                     UnsupportedDimensionError)
from .grid import Ball, Domain, GridFunction, MeasureSpec, RadiusLadder, UniformGrid, ball_sweep
from .norms import classical_morrey_norm, morrey_norm
from .operators import maximal_function, riesz_potential
from .phi import PhiSpec, check_gp, parse_phi
from .reports import InequalityReport, NormReport

__all__ = [
    "Ball", "ConfigError", "DivergenceError", "Domain", "GridFunction", "HypothesisViolationError",
    "InequalityReport", "InsufficientDataError", "InvalidInputError", "MeasureSpec", "MorreyLabError",
    "NoZeroSetError", "NormReport", "OutOfRangeError", "PhiSpec", "RadiusLadder", "UniformGrid",
    "UnsupportedDimensionError", "__version__", "ball_sweep", "check_gp", "classical_morrey_norm",
    "maximal_function", "morrey_norm", "parse_phi", "riesz_potential",
]
