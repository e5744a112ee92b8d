"""Exception hierarchy and CLI exit codes, one class per failure family."""

EXIT_OK = 0
EXIT_GENERIC = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_EXTERNAL = 4
EXIT_NUMERIC = 5


class SarlooksError(Exception):
    """Base class for all toolkit errors."""

    exit_code = EXIT_GENERIC


class ValidationError(SarlooksError):
    """Invalid parameters, inconsistent rasters, or violated preconditions."""

    exit_code = EXIT_VALIDATION


class FormatError(SarlooksError):
    """File format or I/O problems (GRDF, manifests, configs)."""

    exit_code = EXIT_IO


class GrdfMagicError(FormatError):
    """File does not start with the GRDF magic."""


class GrdfTruncatedError(FormatError):
    """Payload or mask section shorter than the header declares."""

    def __init__(self, path, expected, actual):
        super().__init__(
            f"{path}: truncated payload, expected {expected} bytes, got {actual}"
        )
        self.expected = expected
        self.actual = actual


class GrdfDtypeError(FormatError):
    """Header declares a dtype outside the supported {c64, f32} set."""


class ExternalEnhancerError(SarlooksError):
    """External enhancer process failed or violated the raster protocol."""

    exit_code = EXIT_EXTERNAL

    def __init__(self, message, command=None, returncode=None):
        super().__init__(message)
        self.command = command
        self.returncode = returncode


class NumericError(SarlooksError):
    """Non-finite samples or numerically degenerate inputs."""

    exit_code = EXIT_NUMERIC
