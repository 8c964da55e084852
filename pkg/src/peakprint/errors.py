"""Exception hierarchy shared by every module."""


class PeakprintError(Exception):
    """Base class for all library errors."""


class InvalidInputError(PeakprintError, ValueError):
    """Malformed data: empty arrays, NaNs, mismatched dimensions."""


class InvalidParameterError(PeakprintError, ValueError):
    """A parameter is outside its allowed range."""


class InsufficientDataError(PeakprintError, ValueError):
    """Signal too short for the requested analysis."""


class IncompatibleFingerprintError(PeakprintError, ValueError):
    """Fingerprint computed with a different configuration than the model."""


class UnsupportedFormatError(PeakprintError):
    """Audio file uses a codec or bit depth we do not read."""


class CorruptFileError(PeakprintError):
    """Audio file is truncated or its header is inconsistent."""
