"""Numerical variational geometry relative to a constraint set.

Normal cones, coderivatives and subdifferentials "with respect to a set",
computed by sampling limits and validated against brute-force lattice
oracles.  See the README for the map of modules.
"""

__version__ = "0.1.0"

from .config import ToleranceConfig, DEFAULT_CONFIG
from .errors import InputError, NumericalFailure

__all__ = ["ToleranceConfig", "DEFAULT_CONFIG", "InputError", "NumericalFailure", "__version__"]
