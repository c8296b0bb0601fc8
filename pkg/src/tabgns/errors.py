"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class TabGNSError(Exception):
    exit_code = 1


class ConfigError(TabGNSError, ValueError):
    exit_code = 2


class DataError(TabGNSError, ValueError):
    exit_code = 3


class ShapeError(DataError):
    """Array dimensions disagree with what an operation expects."""


class ParseError(DataError):
    pass


class NumericError(TabGNSError, ArithmeticError):
    exit_code = 4


class DivergenceError(NumericError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class StateError(TabGNSError, RuntimeError):
    pass


class IntegrityError(TabGNSError):
    exit_code = 5


class ReportSchemaError(TabGNSError):
    exit_code = 6
