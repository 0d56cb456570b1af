"""Exception hierarchy used across the package."""

import numpy as np

__all__ = [
    "LabourFlowError",
    "DimensionError",
    "InvalidGeneratorError",
    "InvalidStochasticError",
    "InvalidSharesError",
    "NumericError",
    "SingularMatrixError",
    "ConvergenceError",
    "EmptyRowError",
    "PeriodOrderError",
    "InsufficientDataError",
    "NonUniqueEquilibriumError",
    "DegenerateError",
    "FitError",
    "ParseError",
    "DuplicateRecordError",
    "EmptyCountsWarning",
    "ConfigError",
]


class LabourFlowError(Exception):
    """Base class for all package errors."""


class DimensionError(LabourFlowError, ValueError):
    pass


class InvalidGeneratorError(LabourFlowError, ValueError):
    pass


class InvalidStochasticError(LabourFlowError, ValueError):
    pass


class InvalidSharesError(LabourFlowError, ValueError):
    pass


class NumericError(LabourFlowError, ValueError):
    """Non-finite input to a numerical kernel."""


class SingularMatrixError(LabourFlowError, np.linalg.LinAlgError):
    pass


class ConvergenceError(LabourFlowError, RuntimeError):
    pass


class EmptyRowError(LabourFlowError, ValueError):
    """A state has no observed origin transitions, so its row of P is undefined."""

    def __init__(self, state, message=None):
        self.state = state
        super().__init__(message or f"no transitions observed out of state {state!r}")


class PeriodOrderError(LabourFlowError, ValueError):
    pass


class InsufficientDataError(LabourFlowError, ValueError):
    pass


class NonUniqueEquilibriumError(SingularMatrixError):
    pass


class DegenerateError(LabourFlowError, ValueError):
    pass


class FitError(LabourFlowError, RuntimeError):
    pass


class ParseError(LabourFlowError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateRecordError(ParseError):
    pass


class EmptyCountsWarning(UserWarning):
    pass


class ConfigError(LabourFlowError, ValueError):
    """Invalid pipeline configuration."""
