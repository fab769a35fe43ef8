"""Singular scattering limits, dielectric mirrors and quantum filtering.

Submodules
----------
operators   dense operator algebra on truncated spaces
modes       dielectric mode functions and scattering matrices
limits      exchange matrices and their two singular-limit SLH triples
particle    one-dimensional phase-jump solver
qsde        time-binned field dynamics and driven mirror models
filtering   homodyne / counting filters and the unconditional master equation
cli         scenario runner
"""

from .errors import (ArgumentError, CapacityError, InconsistencyError, NumericError, OutputError,
                     QScatterError, ValidationError)
from .operators import HilbertSpace, PhysicalConstants

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "CapacityError", "InconsistencyError", "NumericError", "OutputError",
    "QScatterError", "ValidationError", "HilbertSpace", "PhysicalConstants", "__version__",
]
