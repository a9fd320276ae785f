# tracing_topk/core/errors.py
"""
Exception hierarchy shared by the domain modules, the CLI and the routers.
"""
from pathlib import Path
from typing import Union


class TracingError(Exception):
    pass


class InvalidDimensionError(TracingError):
    pass


class InvalidKError(TracingError):
    pass


class InvalidVectorError(TracingError):
    pass


class InvalidSumError(TracingError):
    pass


class InvalidBudgetError(TracingError):
    pass


class InvalidParameterError(TracingError):
    pass


class InvalidRegimeError(TracingError):
    pass


class DimensionMismatchError(TracingError):
    pass


class ConfigError(TracingError):
    pass


class ReportError(TracingError):
    """I/O failure while reading or writing a report; always names the path."""

    def __init__(self, path: Union[str, Path], reason: str):
        self.path = Path(path)
        self.reason = reason
        super().__init__(f"{self.path}: {reason}")
