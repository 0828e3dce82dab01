"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, NumericalGuardError
(and subclasses) -> 3, CheckFailure -> 4.
"""


class SpincatError(Exception):
    """Base class for all package errors."""


class ConfigError(SpincatError):
    """Invalid, unparsable, or inconsistent configuration input."""


class FormatError(SpincatError):
    """Malformed data file.  Carries the byte offset where parsing failed."""

    def __init__(self, message, byte_offset=None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class SpaceMismatchError(SpincatError):
    """Operands defined on incompatible Hilbert spaces."""


class CapacityError(SpincatError):
    """Requested space or matrix exceeds the configured memory cap."""


class RepresentationError(SpincatError):
    """State incompatible with the requested basis representation."""


class DegenerateCatError(SpincatError):
    """Cat superposition with (numerically) vanishing norm."""


class NumericalGuardError(SpincatError):
    """A runtime numerical guard tripped; results would not be trustworthy."""


class TruncationError(NumericalGuardError):
    """Fock-space truncation leakage above tolerance."""


class StepSizeError(NumericalGuardError):
    """Integration step too large for the requested dynamics."""


class CheckFailure(SpincatError):
    """A validation check ran to completion and failed its threshold."""
