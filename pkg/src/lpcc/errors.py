"""Exception hierarchy.

Everything raised on purpose by this package derives from LpccError, so
callers (and the CLI) can separate user/input problems from genuine bugs.
"""


class LpccError(Exception):
    """Base class for all lpcc errors."""


class CalibrationError(LpccError):
    """Calibration document is malformed or violates sensor invariants."""


class ProjectionError(LpccError):
    """Cloud/plane state unsuitable for the requested transform."""


class QuantizationRangeError(ProjectionError):
    """Value outside the quantizable domain; clamping is the caller's call."""


class CodecError(LpccError):
    """Plane encode or decode failure."""


class UnknownCodecError(CodecError):
    """Codec id not present in the registry."""


class ExternalPayloadError(CodecError):
    """EXTERNAL_RNN payload missing, or asked to decode one in-process."""


class ContainerError(LpccError):
    """Frame (de)serialization failure."""


class BadMagicError(ContainerError):
    pass


class UnsupportedVersionError(ContainerError):
    pass


class DigestMismatchError(ContainerError):
    """Frame was produced with a different sensor calibration."""


class CorruptFrameError(ContainerError):
    """Structurally invalid frame bytes (truncation, bad lengths, bad ids)."""


class MetricsError(LpccError):
    """Metric preconditions violated (empty cloud, missing channel)."""


class PcdError(LpccError):
    """PCD parse or serialize failure."""


class SceneError(LpccError):
    """Scene description is malformed."""
