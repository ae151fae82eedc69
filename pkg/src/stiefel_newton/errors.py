"""Exception hierarchy shared by all modules."""


class StiefelError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(StiefelError, ValueError):
    pass


class ConstraintViolation(StiefelError, ValueError):
    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation


class TangencyViolation(StiefelError, ValueError):
    pass


class RankDeficient(StiefelError, ArithmeticError):
    pass


class PivotFailure(StiefelError, ArithmeticError):
    pass


class DegenerateFrame(StiefelError, ArithmeticError):
    pass


class BaseMismatch(StiefelError, ValueError):
    """Two tangent vectors were combined although they live at different points."""


class NotSymmetric(StiefelError, ValueError):
    pass


class BadWeights(StiefelError, ValueError):
    pass


class ValidationFailure(StiefelError, ValueError):
    pass


class NotCritical(StiefelError, ValueError):
    pass


class SolveFailure(StiefelError, ArithmeticError):
    pass


class DegenerateSpectrum(StiefelError, ValueError):
    pass


class ParseError(StiefelError, ValueError):
    pass
