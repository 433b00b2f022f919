"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Operand shapes are not conformable."""


class SymmetryError(ValueError):
    """A tensor required to be symmetric is not (within tolerance)."""


class DefinitenessError(ValueError):
    """A tensor required to be (semi-)definite is not.

    The smallest eigenvalue found is kept on ``min_eig`` so callers can
    decide how much regularization is needed.
    """

    def __init__(self, message, min_eig=None):
        super().__init__(message)
        self.min_eig = min_eig


class DegenerateDenominatorError(ArithmeticError):
    """The denominator trace of a trace-ratio vanished."""


class SingularSystemError(ValueError):
    """A normal-equation system could not be solved."""


class DataFormatError(ValueError):
    """A file on disk does not match its declared format."""


class ConfigError(ValueError):
    """A benchmark configuration is malformed or infeasible."""
