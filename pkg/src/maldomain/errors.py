"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class MaldomainError(Exception):
    exit_code = 4


class ConfigurationError(MaldomainError, ValueError):
    exit_code = 2


class DataError(MaldomainError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ParseError(DataError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class LabelError(DataError):
    pass


class InvalidSubsetError(DataError):
    pass


class PairingError(DataError):
    pass


class ShapeError(MaldomainError, ValueError):
    pass


class FitError(MaldomainError):
    pass


class ConvergenceError(FitError):
    def __init__(self, message, kkt_violation=None):
        super().__init__(message)
        self.kkt_violation = kkt_violation


class TuningError(MaldomainError):
    pass
