"""Exception types raised across the package."""


class UmapError(Exception):
    """Base class for all errors raised by umaplite."""


class ParameterError(UmapError, ValueError):
    """A hyperparameter or argument is outside its valid range."""


class ParseError(UmapError, ValueError):
    """Malformed CSV input."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DatasetTooSmallError(UmapError, ValueError):
    pass


class DimensionError(UmapError, ValueError):
    pass


class IsolatedPointError(UmapError, ValueError):
    """A point has zero total membership weight."""


class DegenerateDensityError(UmapError, ArithmeticError):
    """Correlation of log-radii is undefined (zero variance)."""


class NumericalDivergenceError(UmapError, ArithmeticError):
    def __init__(self, message, epoch=None, pair=None):
        super().__init__(message)
        self.epoch = epoch
        self.pair = pair


class StageError(UmapError):
    """Wraps an error raised inside a pipeline stage with the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
