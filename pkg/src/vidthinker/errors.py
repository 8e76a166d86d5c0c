"""Exception types shared across the package."""
from __future__ import annotations


class VidThinkerError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(VidThinkerError, ValueError):
    """Input violates a documented precondition."""


class RangeError(ValidationError):
    """A value falls outside its permitted range."""


class MathDomainError(VidThinkerError, ArithmeticError):
    """A numeric operation left its mathematical domain."""


class ParseError(VidThinkerError):
    """Text does not match the expected response grammar.

    Carries the offending text so failures can be audited later.
    """

    def __init__(self, message: str, text: str = ""):
        super().__init__(message)
        self.text = text


class TransportError(VidThinkerError):
    """A remote backend could not be reached or kept failing."""


class ProtocolError(VidThinkerError):
    """A backend answered with a structurally invalid payload."""


class ScenarioError(VidThinkerError):
    """The mock backend has no pinned response for a request."""


class VitgFormatError(VidThinkerError):
    """A feature file violates the VITG container format."""


class VitgMagicError(VitgFormatError):
    """The file does not start with the VITG magic bytes."""


class VitgVersionError(VitgFormatError):
    """The container version is not supported."""


class VitgTruncatedError(VitgFormatError):
    """The payload holds fewer bytes than the header claims."""


class VitgNonFiniteError(VitgFormatError):
    """The payload contains NaN or infinite components."""


class StageFailure(VidThinkerError):
    """One pipeline stage failed for a single (video, qa) record."""

    def __init__(self, stage: str, cause: Exception | str):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = str(cause)
