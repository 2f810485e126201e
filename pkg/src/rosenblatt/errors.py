"""Exception types shared across the package.

Every error maps onto one of the CLI exit codes: parameter/usage problems
exit 2, resource guards exit 3, quadrature or Monte Carlo accuracy failures
exit 4.
"""


class RosenblattError(Exception):
    exit_code = 1


class ParameterError(RosenblattError, ValueError):
    exit_code = 2


class SpecificationError(ParameterError):
    """Malformed grid or test-function specification."""


class StructuralError(ParameterError):
    """Inputs that do not fit together (e.g. mismatched time grids)."""


class InsufficientDataError(ParameterError):
    pass


class SpectralValidityError(ParameterError):
    """Circulant embedding has a clearly negative eigenvalue."""

    def __init__(self, message, worst_eigenvalue):
        super().__init__(message)
        self.worst_eigenvalue = worst_eigenvalue


class ResourceError(RosenblattError):
    exit_code = 3


class AccuracyError(RosenblattError):
    """A numerical routine could not reach its tolerance.

    ``estimate`` and ``achieved`` carry the best value found and its
    (absolute) error estimate so callers can still report them.
    """

    exit_code = 4

    def __init__(self, message, estimate=None, achieved=None):
        super().__init__(message)
        self.estimate = estimate
        self.achieved = achieved


class RangeError(AccuracyError):
    """Values underflowed the representable range."""
