"""Exception hierarchy shared across the toolkit.

Each class maps to one CLI exit code: UsageError -> 1, DataError -> 2,
StateMismatchError -> 3, TrainingError -> 4.
"""


class SmoothRnnError(Exception):
    """Base class for all toolkit errors."""


class UsageError(SmoothRnnError):
    """Caller violated a precondition (bad shapes, bad arguments, bad config)."""


class DataError(SmoothRnnError):
    """Input data could not be read, parsed, or is degenerate."""


class StateMismatchError(SmoothRnnError):
    """Stored state (checkpoint) does not match what the caller asked for."""


class TrainingError(SmoothRnnError):
    """Optimization produced non-finite values or otherwise diverged."""
