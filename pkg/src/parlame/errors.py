"""Exception types shared across the package."""


class ParlameError(Exception):
    """Base class for all library errors."""


class DomainError(ParlameError):
    """Non-finite or otherwise inadmissible numeric input."""


class SingularityError(ParlameError):
    """Kernel evaluation requested too close to the space-time diagonal."""


class AccuracyError(ParlameError):
    """A quadrature or refinement loop failed to reach its tolerance.

    Carries the tolerance actually achieved in ``achieved``.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ConfigurationError(ParlameError):
    """Invalid run configuration or unsupported shape/parameter combination."""


class InvariantViolation(ParlameError):
    """A constructed object failed one of its declared invariants."""


class ConditioningError(ParlameError):
    """Gram matrices too ill-conditioned to proceed; carries a report dict."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class DegenerateGeometryError(ParlameError):
    """Nested-domain configuration leaves no usable spectrum."""
