"""Simulation and verification toolkit for the Rosenblatt process."""

__version__ = "0.1.0"

from .errors import (AccuracyError, InsufficientDataError, ParameterError, RangeError,
                     ResourceError, RosenblattError, SpecificationError, SpectralValidityError,
                     StructuralError)
from .sampling import RngStream

__all__ = [
    "__version__",
    "RngStream",
    "RosenblattError",
    "ParameterError",
    "SpecificationError",
    "StructuralError",
    "InsufficientDataError",
    "SpectralValidityError",
    "ResourceError",
    "AccuracyError",
    "RangeError",
]
