"""Exception types shared across the package."""


class BlowupLabError(Exception):
    """Base class for all package errors."""


class ParameterError(BlowupLabError, ValueError):
    pass


class ConfigurationError(BlowupLabError, ValueError):
    pass


class ShapeError(BlowupLabError, ValueError):
    pass


class DomainError(BlowupLabError, ValueError):
    """A soliton or transform was evaluated outside its domain of definition."""

    def __init__(self, msg, critical=None):
        super().__init__(msg)
        self.critical = critical


class NumericError(BlowupLabError, ArithmeticError):
    def __init__(self, msg, condition=None):
        super().__init__(msg)
        self.condition = condition


class FitError(BlowupLabError):
    """Newton did not converge; ``best`` holds the best iterate seen."""

    def __init__(self, msg, best=None, min_gap=None):
        super().__init__(msg)
        self.best = best
        self.min_gap = min_gap


class RegionError(BlowupLabError):
    pass


class WindowError(BlowupLabError):
    pass


class ScheduleError(BlowupLabError):
    pass


class TruncationError(BlowupLabError):
    pass
