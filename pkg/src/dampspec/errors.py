"""Exception hierarchy shared by the toolkit."""


class DampSpecError(Exception):
    """Base class for toolkit errors."""


class ConfigError(DampSpecError, ValueError):
    """Invalid domain descriptor, scenario file or parameter."""


class CoefficientError(DampSpecError, ValueError):
    """A coefficient sample is not finite."""


class CoefficientValidationError(CoefficientError):
    """A declared limit at infinity disagrees with the boundary-zone samples."""


class SolverError(DampSpecError, RuntimeError):
    """An eigen- or linear solve did not reach its tolerance.

    ``best_residual`` holds the smallest residual seen, ``context`` any
    diagnostics (e.g. the offending ``mu`` or time step).
    """

    def __init__(self, message, best_residual=float("nan"), **context):
        super().__init__(message)
        self.best_residual = best_residual
        self.context = context


class RangeError(DampSpecError, ValueError):
    """A table does not extend far enough for the requested estimate."""


class TableExtensionRequired(RangeError):
    """A cross-check needs ``mu`` values outside the sampled table."""

    def __init__(self, message, mu_values=()):
        super().__init__(message)
        self.mu_values = tuple(mu_values)


class ValidationMismatch(DampSpecError):
    """The eigencurve and block-operator paths disagree."""

    def __init__(self, message, summary=None):
        super().__init__(message)
        self.summary = summary
