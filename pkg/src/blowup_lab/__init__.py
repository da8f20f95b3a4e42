"""Numerical laboratory for co-rotational wave maps into surfaces of revolution."""

from .errors import (BlowupLabError, ConvergenceError, InvalidProfileError, NumericalFault,
                     ResolutionError, StabilityError, BlowupSuspected)
from .surface import SurfaceProfile, make_sphere, make_from_series, validate

__version__ = "0.1.0"

__all__ = [
    "BlowupLabError", "ConvergenceError", "InvalidProfileError", "NumericalFault",
    "ResolutionError", "StabilityError", "BlowupSuspected",
    "SurfaceProfile", "make_sphere", "make_from_series", "validate", "__version__",
]
