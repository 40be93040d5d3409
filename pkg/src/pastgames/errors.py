"""Exceptions raised by the toolkit.

Problems with user input derive from ``ValueError`` so callers can treat them
uniformly; ``InconclusiveError`` marks a bounded search that could not decide.
"""
from typing import Optional


class GameSpecError(ValueError):
    """A game document or one of its parts is malformed."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class StageOverflowError(ValueError):
    """A position was extended past stage 0."""


class TailNotMaterializableError(ValueError):
    """A concrete action was requested from a tail whose actions are not known."""


class UnsupportedTailPatternError(ValueError):
    """A generator cannot be decided over an abstract tail class."""


class UnknownGalleryEntryError(ValueError):
    """No gallery entry with the requested id."""


class PreconditionError(ValueError):
    """An operation was invoked outside its documented domain."""


class UndecidableTailError(ValueError):
    """A payoff comparison depends on actions hidden in an abstract tail."""


class InconclusiveError(RuntimeError):
    """A bounded search stopped before reaching a verdict."""

    def __init__(self, message: str, cutoff: Optional[int] = None):
        self.cutoff = cutoff
        super().__init__(message)
