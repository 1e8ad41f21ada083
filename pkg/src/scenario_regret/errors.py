"""Exception hierarchy shared by all modules."""


class RegretError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(RegretError, ValueError):
    pass


class RankDeficientE(RegretError, ValueError):
    pass


class NumericalFailure(RegretError, ArithmeticError):
    pass


class SampleMismatch(RegretError, ValueError):
    pass


class EigenFailure(RegretError, ArithmeticError):
    pass


class DomainError(RegretError, ValueError):
    pass


class Infeasible(RegretError):
    pass


class SolverFailure(RegretError):
    def __init__(self, message: str, status: str | None = None):
        super().__init__(message)
        self.status = status


class InconsistentTrajectory(RegretError, ValueError):
    pass


class NotSquare(RegretError, ValueError):
    pass


class SingularMap(RegretError, ArithmeticError):
    pass


class ConfigError(RegretError, ValueError):
    pass
