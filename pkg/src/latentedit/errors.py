"""Exception hierarchy. Every error carries the CLI exit code of its family:
2 config, 3 I/O and file format, 4 remote service, 5 numerical/domain."""


class LatentEditError(Exception):
    exit_code = 1


class ConfigError(LatentEditError):
    """Invalid configuration value, unknown key, or inconsistent settings."""

    exit_code = 2


class FormatError(LatentEditError):
    """File container violates the format: bad magic, version, kind, or dims."""

    exit_code = 3


class LengthError(FormatError):
    """Container payload shorter or longer than the header promises."""


class ServiceError(LatentEditError):
    exit_code = 4


class TransportError(ServiceError):
    """Remote endpoint unreachable (after the single retry)."""


class ProtocolError(ServiceError):
    """Remote endpoint answered with a malformed or unexpected response."""


class AnalysisError(ServiceError):
    """Instruction analysis failed (empty instruction, no objects extracted)."""


class SegmentationError(ServiceError):
    """Segmentation backend has no mask for the requested object."""


class NumericalError(LatentEditError):
    """Non-finite values or other numeric contract violations."""

    exit_code = 5


class DimensionError(NumericalError):
    """Operand shapes are inconsistent."""


class DomainError(NumericalError):
    """A value lies outside its documented domain."""


class ConditionError(NumericalError):
    """Conditioning vector maps to an unregistered condition id."""


class TrajectoryError(NumericalError):
    """A required inversion-trajectory entry is missing."""
