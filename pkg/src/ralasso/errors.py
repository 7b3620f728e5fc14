"""Exception types raised across the package."""


class RaLassoError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(RaLassoError, ValueError):
    pass


class ShapeError(RaLassoError, ValueError):
    pass


class DegenerateDesignError(RaLassoError, ValueError):
    pass


class DivergenceError(RaLassoError, ArithmeticError):
    """Objective became non-finite during iteration (step size too large)."""


class RankDeficiencyError(RaLassoError, ArithmeticError):
    pass


class CalibrationError(RaLassoError, ValueError):
    """The concentration calibration cannot be applied at this sample size.

    ``min_n`` carries the smallest sample size for which it would apply.
    """

    def __init__(self, message, min_n=None):
        super().__init__(message)
        self.min_n = min_n


class DegenerateGainError(RaLassoError, ArithmeticError):
    pass
