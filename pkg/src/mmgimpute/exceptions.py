"""Exception and warning types shared across the package."""


class MMGError(Exception):
    """Base class for all errors raised by mmgimpute."""


class InvalidArgumentError(MMGError, ValueError):
    pass


class ParseError(MMGError):
    """Malformed input file. Carries the offending location when known."""

    def __init__(self, message, *, row=None, column=None, line=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column
        self.line = line


class SchemaError(ParseError):
    pass


class NoSupportError(MMGError):
    """Too few qualifying rows to fit a submodel or nuisance model.

    ``patterns`` lists the connected patterns (as bit strings) that failed.
    """

    def __init__(self, message, patterns=()):
        super().__init__(message)
        self.patterns = list(patterns)


class SingularityError(MMGError, ArithmeticError):
    pass


class ConvergenceError(MMGError):
    def __init__(self, message, grad_norm=None):
        super().__init__(message)
        self.grad_norm = grad_norm


class DegenerateFitError(MMGError):
    pass


class FitError(MMGError):
    pass


class UnderflowError(MMGError, ArithmeticError):
    pass


class ConfigurationError(MMGError):
    pass


class BootstrapError(MMGError):
    pass


class ExperimentError(MMGError):
    pass


class EMMonotonicityWarning(RuntimeWarning):
    """Observed-data log-likelihood decreased between EM iterations."""


class ComponentCollapseWarning(RuntimeWarning):
    pass


class SeparationWarning(RuntimeWarning):
    pass


class SingularCovarianceWarning(RuntimeWarning):
    pass


class DroppedRowsWarning(UserWarning):
    pass


class FallbackWarning(UserWarning):
    """A submodel was fitted with the marginal no-support fallback."""


class ColumnTypeError(MMGError, TypeError):
    """A column's kind does not suit the requested submodel family."""
