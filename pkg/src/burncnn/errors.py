"""Exception types shared across the package."""


class BurnCnnError(Exception):
    """Base class for all package errors."""


class ContractViolation(BurnCnnError):
    """An operation was called with arguments that break its contract."""


class ManifestError(BurnCnnError):
    """A dataset manifest failed to parse or validate.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InfeasibleSplit(BurnCnnError):
    """The requested split cannot be formed from the given manifest."""


class CheckpointFormatError(BurnCnnError):
    """A checkpoint file is malformed. Carries the byte offset of the defect."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnsupportedVersionError(CheckpointFormatError):
    """Checkpoint format version is newer than this build supports."""


class IncompatibleCheckpoint(BurnCnnError):
    """A checkpoint is structurally incompatible with the expected network."""


class DivergenceError(BurnCnnError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, step: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}, step {step}")
        self.epoch = epoch
        self.step = step


class DecodeError(BurnCnnError):
    """An image file could not be decoded."""
