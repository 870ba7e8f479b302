"""Exception hierarchy.

The CLI maps :class:`ConfigError` (and plain ``ValueError``) to exit code 2
and :class:`NumericError` to exit code 3.
"""


class BmaError(Exception):
    """Base class for package errors."""


class ConfigError(BmaError, ValueError):
    """Invalid configuration, hyperparameter or override."""


class NumericError(BmaError, ArithmeticError):
    """A numerical routine could not produce a trustworthy value."""


class QuadratureError(NumericError):
    pass


class RootFindingError(NumericError):
    pass


class MultipleRootsError(RootFindingError):
    def __init__(self, message, phi=None):
        super().__init__(message)
        self.phi = phi


class IndeterminateRootError(RootFindingError):
    pass


class DegenerateStratumError(NumericError, ValueError):
    """A conditional probability has a zero denominator."""


class SupportError(NumericError, ValueError):
    """A scenario has zero prior density under every model."""


class SamplingError(NumericError):
    """Rejection sampler failed to accept within its attempt budget."""


class InvestigatorError(NumericError):
    """Limit evaluation failed for a specific Monte Carlo draw."""

    def __init__(self, draw_index, cause):
        super().__init__(f"investigator evaluation failed at draw {draw_index}: {cause}")
        self.draw_index = draw_index
        self.cause = cause
