"""Exception hierarchy shared by the library and the command line."""


class PQSError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigError(PQSError, ValueError):
    """Invalid model or simulation configuration.

    ``problems`` lists every violated constraint, not just the first one.
    """

    exit_code = 1

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class RecordParseError(PQSError, ValueError):
    exit_code = 1

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InconsistentRecordError(PQSError, ArithmeticError):
    """A measurement update annihilated the whole distribution."""


class DisjointSupportError(PQSError, ArithmeticError):
    pass


class TruncationOverflowError(PQSError, RuntimeError):
    """A simulated trajectory reached the top Fock level."""


class FitError(PQSError, RuntimeError):
    def __init__(self, message, initial=None):
        self.initial = initial
        super().__init__(message)
