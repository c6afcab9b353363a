"""Exception types shared across the package."""


class QarrivalError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(QarrivalError):
    """Invalid grid, parameter, or scenario configuration."""


class ContainmentError(QarrivalError):
    """Initial state has too much mass outside the simulation box."""


class ResourceCapError(QarrivalError):
    """Requested matrix build exceeds the configured size cap."""


class IntegratorFault(QarrivalError):
    """A time integrator violated one of its runtime audits."""
