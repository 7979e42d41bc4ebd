"""Error hierarchy shared by every stnlab package"""

from typing import Optional


class StnlabError(Exception):
    """Base class for all stnlab errors"""


class RejectedInputError(StnlabError, ValueError):
    """An argument violates a shape, extent, range or label precondition"""


class SingularTransformError(StnlabError, ValueError):
    """Affine transform whose linear part cannot be inverted"""


class DegenerateTransformError(StnlabError, ValueError):
    """Affine transform whose first column is (numerically) zero"""


class IdxFormatError(StnlabError):
    """Malformed IDX container"""

    def __init__(self, message: str, offset: int, path: Optional[str] = None):
        where = f"{path}: " if path else ""
        super().__init__(f"{where}{message} (byte offset {offset})")
        self.offset = offset
        self.path = path


class BadMagicError(IdxFormatError):
    pass


class TruncatedPayloadError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


class RejectedSpecError(StnlabError, ValueError):
    """NetworkSpec violates a structural invariant"""


class CheckpointError(StnlabError):
    """Checkpoint container cannot be read"""


class CheckpointVersionError(CheckpointError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class UnknownLayerError(CheckpointError):
    pass


class IncompatibleCheckpointError(StnlabError):
    """Checkpoint does not fit the requested data or configuration"""


class DivergenceError(StnlabError):
    """Training loss became non-finite"""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged in epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


class ConfigParseError(StnlabError):
    """Run configuration file could not be parsed or validated"""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
        self.line = line
        self.key = key
