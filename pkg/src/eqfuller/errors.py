"""Exception types raised across the package."""


class EqFullerError(Exception):
    pass


class ConfigError(EqFullerError, ValueError):
    pass


class GroupError(EqFullerError, ValueError):
    """Invalid multiplication table or representation."""


class GroupTooLarge(EqFullerError):
    pass


class AmbiguousIsotropy(EqFullerError):
    pass


class LatticeMismatch(EqFullerError, TypeError):
    pass


class StepFailure(EqFullerError):
    def __init__(self, msg, state=None, t=None):
        super().__init__(msg)
        self.state = state
        self.t = t


class EquilibriumPoint(EqFullerError):
    pass


class TransversalityFailure(EqFullerError):
    pass


class PreconditionViolation(EqFullerError, ValueError):
    pass


class NoReturn(EqFullerError):
    pass


class EscapedTube(EqFullerError):
    pass


class HopLimit(EqFullerError):
    pass


class NotFound(EqFullerError):
    pass


class WindowRejected(EqFullerError):
    pass


class AmbiguousPeriod(EqFullerError):
    pass


class DegenerateFixedPoint(EqFullerError):
    def __init__(self, msg, iterate=None):
        super().__init__(msg)
        self.iterate = iterate


class NonIntegralSolution(EqFullerError):
    pass


class DegenerateField(EqFullerError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class PreconditionUnverified(EqFullerError):
    pass


class ContinuationStall(EqFullerError):
    pass


class InvarianceViolation(EqFullerError):
    def __init__(self, msg, bracket=None, before=None, after=None):
        super().__init__(msg)
        self.bracket = bracket
        self.before = before
        self.after = after


class Inadmissible(EqFullerError):
    pass
