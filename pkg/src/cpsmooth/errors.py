"""Exception hierarchy shared by all cpsmooth modules."""


class CPSmoothError(Exception):
    """Base class for every error raised by cpsmooth."""


class InputError(CPSmoothError, ValueError):
    """Malformed input: non-finite numbers, invalid block specs, bad configs."""


class DomainError(CPSmoothError, ValueError):
    """Input is well-formed but outside the domain of the requested quantity."""


class ResourceError(CPSmoothError):
    """A computation would exceed a configured size cap."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class NumericError(CPSmoothError):
    """A numerical procedure failed to converge."""


class PreconditionError(CPSmoothError):
    """Hypotheses of a validator are not met by its input."""
