"""Exception types raised across the package."""


class LsdError(Exception):
    """Base class for all package errors."""


class DegenerateVectorError(LsdError, ValueError):
    pass


class InvalidTemperatureError(LsdError, ValueError):
    pass


class DimensionError(LsdError, ValueError):
    pass


class TraceError(LsdError, ValueError):
    """A forward trace does not belong to the encoder state it is used with."""


class DivergenceError(LsdError, FloatingPointError):
    """Non-finite values appeared during training."""


class EmptyPairError(LsdError, ValueError):
    """A loss or miner found no usable pairs / triplets in the batch."""


class UnknownClassError(LsdError, KeyError):
    pass


class SpecError(LsdError, ValueError):
    """A batch, split or noise request cannot be satisfied by the dataset."""


class ScheduleError(LsdError, ValueError):
    pass


class ConfigError(LsdError, ValueError):
    pass


class ParseError(LsdError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ParseError):
    pass
