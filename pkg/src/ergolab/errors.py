"""Exception types shared across the package."""


class ErgolabError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(ErgolabError, ValueError):
    """A distribution or kernel was configured with invalid parameters."""


class RangeError(ErgolabError, OverflowError):
    """A requested value exceeds the representable floating-point range.

    ``max_admissible`` reports the largest index magnitude that stays in range.
    """

    def __init__(self, message, max_admissible=None):
        super().__init__(message)
        self.max_admissible = max_admissible


class SizeError(ErgolabError, ValueError):
    """A problem instance exceeds a configured size budget.

    For grid problems ``suggested_spacing`` is the coarsest spacing that
    would fit the budget.
    """

    def __init__(self, message, suggested_spacing=None):
        super().__init__(message)
        self.suggested_spacing = suggested_spacing


class ConfigurationError(ErgolabError, ValueError):
    """An operation was invoked on a model missing a required ingredient."""
