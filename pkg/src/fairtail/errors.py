"""Exception hierarchy.

``DataError`` subclasses describe bad input data (CLI exit code 2);
``ConfigError`` describes invalid parameters or configuration (exit code 1).
"""

from __future__ import annotations


class FairtailError(Exception):
    pass


class ConfigError(FairtailError, ValueError):
    pass


class DataError(FairtailError):
    pass


class LineError(DataError):
    """A problem tied to one line of an input file."""

    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        self.detail = message
        super().__init__(f"line {lineno}: {message}")


class MalformedLine(LineError):
    pass


class NonPositiveCount(LineError):
    pass


class ConflictingMapping(LineError):
    pass


class EmptyDataset(DataError):
    pass


class UnmappedItem(DataError):
    def __init__(self, item: str):
        self.item = item
        super().__init__(f"item {item!r} has no provider in the provider map")


class InsufficientData(DataError):
    pass


class DegeneratePartition(DataError):
    pass


class ZeroVector(DataError):
    pass


class IndexOutOfRange(FairtailError, IndexError):
    pass


class ScoreUndefined(FairtailError):
    pass


class EmptyGroup(FairtailError, ValueError):
    pass


class ZeroBaseGap(FairtailError, ZeroDivisionError):
    pass
