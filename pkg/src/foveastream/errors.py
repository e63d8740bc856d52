"""Exception hierarchy shared by all foveastream modules."""


class FoveaStreamError(Exception):
    """Base class for every error raised deliberately by this package."""


class DomainError(FoveaStreamError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class TraceParseError(FoveaStreamError, ValueError):
    """A gaze trace file could not be parsed.

    ``line`` is the 1-based line number in the file (the header is line 1).
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TraceValidationError(TraceParseError):
    """A trace parsed but violates an ordering invariant."""


class DecodeError(FoveaStreamError, ValueError):
    """A datagram is not a well-formed gaze message."""


class FrameLengthError(DecodeError):
    pass


class BadMagicError(DecodeError):
    pass


class UnsupportedVersionError(DecodeError):
    pass


class CoordinateRangeError(DecodeError):
    pass
