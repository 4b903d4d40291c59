"""Exception hierarchy shared by every module.

Each error carries a stable machine-readable `code` (the class name) so the
CLI can report failures as JSON without string matching on messages.
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class EvliveError(Exception):
    """Base class for all library errors."""

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.code, "message": str(self)}


# event_core
class BadMagic(EvliveError):
    pass


class UnsupportedVersion(EvliveError):
    pass


class TruncatedRecord(EvliveError):
    pass


class OutOfBounds(EvliveError):
    pass


class NonMonotonic(EvliveError):
    pass


class MissingHeader(EvliveError):
    pass


class NonZeroReserved(EvliveError):
    """EVT0 header reserved field or record padding is not zero."""


class BadPolarity(EvliveError):
    pass


class ParseError(EvliveError):
    """Malformed CSV row. `line` is 1-based and counts the header."""

    def __init__(self, message: str, *, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line

    def to_dict(self) -> Dict[str, Any]:
        payload = super().to_dict()
        payload["line"] = self.line
        return payload


class RoiOutOfBounds(EvliveError):
    pass


class InvalidInterval(EvliveError):
    pass


class InvalidParameter(EvliveError):
    pass


# representations / detection
class EmptySeries(EvliveError):
    pass


class EmptyStream(EvliveError):
    pass


class NoWindows(EvliveError):
    pass


class NotUniform(EvliveError):
    pass


class GridMismatch(EvliveError):
    pass


class EmptyInput(EvliveError):
    pass


# liveness
class OneClassOnly(EvliveError):
    pass


class MissingFeature(EvliveError):
    def __init__(self, feature: str) -> None:
        super().__init__(f"clip features lack '{feature}' used by the classifier")
        self.feature = feature


# synth
class OverlappingMovements(EvliveError):
    pass


# cli
class MissingInput(EvliveError):
    def __init__(self, message: str, *, path: Optional[str] = None) -> None:
        super().__init__(message)
        self.path = path
