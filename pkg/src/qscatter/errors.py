"""Exception hierarchy.

Every error carries the process exit code the command line maps it to:
2 validation / bad arguments, 3 numerics, 4 capacity, 5 I/O.
"""


class QScatterError(Exception):
    exit_code = 1


class ArgumentError(QScatterError, ValueError):
    exit_code = 2


class ValidationError(ArgumentError):
    """Scenario document failed schema validation.

    ``violations`` holds one ``"path: message"`` string per problem.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericError(QScatterError, ArithmeticError):
    exit_code = 3


class SingularityError(NumericError):
    """A closed-form denominator or inverse vanished."""

    def __init__(self, message, omega=None):
        self.omega = omega
        super().__init__(message)


class DegenerateGeometryError(NumericError):
    pass


class InconsistencyError(NumericError):
    pass


class IntegratorStepError(NumericError):
    pass


class TruncationError(NumericError):
    pass


class RateError(NumericError):
    pass


class ResolutionError(NumericError):
    pass


class CapacityError(QScatterError, MemoryError):
    exit_code = 4


class OutputError(QScatterError, OSError):
    exit_code = 5
