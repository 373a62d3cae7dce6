"""Exception hierarchy shared across the package."""


class FactorCLTError(Exception):
    """Base class for all package errors."""


class ArgumentError(FactorCLTError, ValueError):
    """Invalid argument (shape, range, symmetry)."""


class DegenerateVarianceError(FactorCLTError, ArithmeticError):
    """A variance that must be positive is zero."""


class DegenerateRegressorError(FactorCLTError, ArithmeticError):
    """A regressor or instrument carries no variation."""


class ConfigError(FactorCLTError, ValueError):
    """Configuration problem, optionally tied to a key and a line number."""

    def __init__(self, message, key=None, line=None):
        self.message = message
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ExperimentError(FactorCLTError, RuntimeError):
    """A Monte Carlo cell failed; carries the cell coordinates."""
