"""Exception hierarchy shared by all solver modules."""


class GramianRKError(Exception):
    """Base class for every error raised by this package."""


class NonPositiveRealPart(GramianRKError, ValueError):
    pass


class UnsupportedStageCount(GramianRKError, ValueError):
    pass


class SingularStabilityDenominator(GramianRKError, ArithmeticError):
    pass


class RealShiftNotPairable(GramianRKError, ValueError):
    pass


class TableauRejected(GramianRKError, ValueError):
    pass


class StageSolveFailed(GramianRKError, ArithmeticError):
    pass


class NotConverged(GramianRKError):
    """Raised by strict solves that exhaust their step budget.

    The partially advanced iteration is available as ``state`` so callers can
    still write out the factor computed so far.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class UnstableMatrix(GramianRKError, ValueError):
    pass


class ImproperShiftSet(GramianRKError, ValueError):
    pass


class ArnoldiBreakdown(UserWarning):
    """Arnoldi stopped early; fewer Ritz values than requested are available."""


class SingularKroneckerSystem(GramianRKError, ArithmeticError):
    pass


class SingularStageSystem(GramianRKError, ArithmeticError):
    pass


class IllConditionedEigenbasis(GramianRKError, ArithmeticError):
    pass


class StepSizeTooLarge(GramianRKError, ArithmeticError):
    pass


class ParseError(GramianRKError, ValueError):
    """Malformed Matrix Market input; ``line`` is 1-based (0 if unknown)."""

    def __init__(self, message, line=0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class SymmetryViolation(GramianRKError, ValueError):
    pass
