"""
Exception hierarchy for the reliable-slicing package.

Every error raised on purpose by the package derives from SlicingError so the
command-line front end can report it as a single machine-readable line.
"""


class SlicingError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SlicingError, ValueError):
    """Invalid, unknown or out-of-range configuration value."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class ContractViolationError(SlicingError, ValueError):
    """A caller broke an operation's precondition."""


class UndefinedLatencyError(SlicingError, ZeroDivisionError):
    """Processing latency requested for a zero allocation."""


class EmptyCommitteeError(SlicingError):
    """No base station meets the committee reputation threshold."""


class StaleCacheError(SlicingError):
    """Backward pass requested without a matching forward pass."""


class ShapeMismatchError(SlicingError, ValueError):
    """Network input or parameter shapes do not line up."""


class TrainingDivergedError(SlicingError, FloatingPointError):
    """A loss or parameter became NaN or infinite during training."""


class CheckpointError(SlicingError):
    """Checkpoint container is malformed or has an unsupported version."""


class FigureDataError(SlicingError, FileNotFoundError):
    """A run required for figure emission has no log on disk."""
