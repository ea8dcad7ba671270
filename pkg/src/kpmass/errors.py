"""Exception types shared across the package."""


class KPMassError(Exception):
    """Base class for package errors."""


class DomainError(KPMassError, ValueError):
    """A parameter lies outside the range where the requested object exists."""


class ConvergenceError(KPMassError, RuntimeError):
    """An iterative or adaptive numerical method failed to reach its target."""
