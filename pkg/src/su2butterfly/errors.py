"""Exception hierarchy shared across the package."""


class ButterflyError(Exception):
    """Base class for all package errors."""


class ParityViolation(ButterflyError):
    """Operator does not block-diagonalize under the mode-exchange parity."""


class ConvergenceFailure(ButterflyError):
    """Eigen-decomposition residual exceeded the allowed bound."""


class AmbiguousTracking(ButterflyError):
    """Eigenvector overlaps too weak to connect consecutive grid columns."""


class RefinementBudgetExceeded(ButterflyError):
    """Adaptive crossing search ran out of refinement budget.

    The partial list of records found so far is attached as ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial or []


class InsufficientLevels(ButterflyError):
    """Too few eigenphases for a meaningful box-counting fit."""


class EmptyWindow(ButterflyError):
    """Histogram window contains no eigenphases."""


class NonPowerOfTwo(ButterflyError):
    """Sequence length is not a power of two and padding is disabled."""


class ConfigError(ButterflyError):
    """Invalid command-line or run configuration."""


class ParseError(ButterflyError):
    """Dataset file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaMismatch(ButterflyError):
    """Dataset header declares an unsupported schema version or kind."""
