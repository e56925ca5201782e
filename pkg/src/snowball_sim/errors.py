"""Exception types shared across the simulator."""


class ParameterError(ValueError):
    """An argument violates an operation's precondition."""


class ShapeError(ValueError):
    """Array dimensions do not match what an operation expects."""


class StateError(RuntimeError):
    """An object is used out of sequence (e.g. a stale backward cache)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


class AggregationError(RuntimeError):
    """Aggregation was requested over an empty selectee set."""


class ConfigError(ValueError):
    """Invalid run configuration.

    ``line`` is the 1-based line number in the config file when the error
    originates from parsing, else None.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
