"""Exception hierarchy shared by the library and the command line."""


class GPError(Exception):
    """Base class; `exit_code` is what the CLI returns for this failure."""

    exit_code = 1


class ConfigError(GPError):
    exit_code = 2


class DSLSyntaxError(ConfigError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class DataError(GPError):
    exit_code = 3


class InvalidArgumentError(DataError, ValueError):
    pass


class NumericalError(GPError):
    exit_code = 4

    def __init__(self, message: str, jitter: float | None = None):
        if jitter is not None:
            message = f"{message} (jitter tried: {jitter:.3e})"
        super().__init__(message)
        self.jitter = jitter


class KernelDomainError(NumericalError):
    pass


class OptimizationError(GPError):
    exit_code = 5


class FitError(OptimizationError):
    def __init__(self, message: str, trace: list[float] | None = None):
        super().__init__(message)
        self.trace = list(trace or [])
