"""
Exception hierarchy shared by every tlground module.

Each error class carries the process exit code the CLI reports for it.
"""


class TlgError(Exception):
    """Base class for all tlground errors."""

    exit_code = 1


class ConfigError(TlgError, ValueError):
    """Invalid or unknown configuration values."""

    exit_code = 2


class InputError(TlgError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class DimensionError(InputError):
    """Mask, feature or tensor shapes that do not line up."""


class FormatError(InputError):
    """Unreadable artifact file (bad magic, truncated payload, malformed JSON)."""


class NumericError(TlgError, ArithmeticError):
    """Non-finite values produced during the grounding forward pass."""

    exit_code = 4

    def __init__(self, message: str, layer: int | None = None):
        super().__init__(message)
        self.layer = layer


class PropagationError(TlgError):
    """A propagator could not produce a mask for one frame."""


class StageError(TlgError):
    """Failure of one pipeline stage for one video."""

    def __init__(self, stage: str, video_id: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed for video '{video_id}': {cause}")
        self.stage = stage
        self.video_id = video_id
        self.exit_code = getattr(cause, "exit_code", 1)
