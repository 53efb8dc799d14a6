"""Exception hierarchy shared by every fetel module.

Each class carries the CLI exit code it maps to: 1 for usage/config
problems, 2 for bad input data, 3 for runtime failures.
"""


class FetelError(Exception):
    exit_code = 3


class ConfigError(FetelError):
    exit_code = 1


class DataError(FetelError):
    exit_code = 2


class MalformedTypePath(DataError):
    pass


class UnknownType(DataError):
    pass


class UnknownEntity(DataError):
    pass


class EmptySurface(DataError):
    pass


class SchemaViolation(DataError):
    def __init__(self, message, index=None):
        if index is not None:
            message = f"record {index}: {message}"
        super().__init__(message)
        self.index = index


class DimensionMismatch(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SpanOutOfRange(DataError):
    pass


class InsufficientData(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class EmptyEvaluation(DataError):
    pass


class IoFailure(DataError):
    pass


class FormatVersionMismatch(IoFailure):
    pass


class NonFiniteLoss(FetelError):
    pass
