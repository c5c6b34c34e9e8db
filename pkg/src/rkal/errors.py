"""Exception types raised across the package."""


class RKALError(Exception):
    """Base class for all errors raised by :mod:`rkal`."""


class UnsupportedStageCount(RKALError, ValueError):
    pass


class SingularTableau(RKALError):
    pass


class DimensionMismatch(RKALError, ValueError):
    pass


class OddCellCount(RKALError, ValueError):
    pass


class MissingBoundaryValue(RKALError, ValueError):
    pass


class SingularPivot(RKALError):
    pass


class DiagonalBreakdown(RKALError):
    pass


class NotSolenoidal(RKALError, ValueError):
    pass


class NewtonDiverged(RKALError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FullMpTooLarge(RKALError, ValueError):
    pass


class SingularInner(RKALError):
    pass


class ConfigError(RKALError, ValueError):
    pass
