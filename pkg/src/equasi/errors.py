"""Exception hierarchy shared by every module of the toolkit."""

from __future__ import annotations


class EquasiError(Exception):
    """Base class for all toolkit errors."""


class ExpressionSyntaxError(EquasiError):
    """Raised by the parser; carries the offending position and expected tokens."""

    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        self.position = position
        self.expected = tuple(expected)
        detail = f"{message} at position {position}"
        if expected:
            detail += f" (expected one of: {', '.join(expected)})"
        super().__init__(detail)


class UnknownIdentifier(ExpressionSyntaxError):
    def __init__(self, name: str, position: int):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", position)


class DomainError(EquasiError):
    """An intermediate operation is undefined at a point inside the declared box."""


class NotDifferentiable(EquasiError):
    """Gradient requested at a kink, or the two differentiation routes disagree."""


class RootsNotVerified(EquasiError):
    pass


class TooManyKinks(EquasiError):
    pass


class PreconditionFailed(EquasiError):
    """A hypothesis of an existence or optimality theorem failed its numerical check.

    ``assumption`` names the failing hypothesis; ``report`` holds whatever partial
    report was assembled before the failure (may be ``None``).
    """

    def __init__(self, assumption: str, detail: str = "", report=None):
        self.assumption = assumption
        self.detail = detail
        self.report = report
        msg = f"precondition failed: {assumption}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class HypothesisFailed(EquasiError):
    def __init__(self, detail: str, witness=None):
        self.detail = detail
        self.witness = witness
        super().__init__(detail)


class InfeasibleCandidate(EquasiError):
    pass


class GradientUnavailable(EquasiError):
    pass


class SpecError(EquasiError):
    """Problem-specification errors; ``location`` is a dotted path into the file."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ParseError(SpecError):
    pass


class UnresolvedReference(SpecError):
    def __init__(self, name: str, location: str = ""):
        self.name = name
        super().__init__(f"unresolved reference {name!r}", location)


class DimensionMismatch(SpecError):
    pass
