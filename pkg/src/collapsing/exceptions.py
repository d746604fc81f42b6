"""Exception types raised across the package."""


class ContractError(ValueError):
    """An argument violates a documented precondition (shape, sign, range)."""


class ConfigurationError(ValueError):
    """A quadrature or run configuration cannot deliver the promised accuracy."""


class ConstructionError(RuntimeError):
    """A family or point cloud could not be built.

    ``achieved`` carries the number of points obtained before giving up.
    """

    def __init__(self, message, achieved=0):
        super().__init__(message)
        self.achieved = achieved


class ResourceError(RuntimeError):
    """A build would exceed a configured size cap."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required
