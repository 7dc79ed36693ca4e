"""Shared exception types."""


class ShapeError(ValueError):
    """Array shape or vector length does not match what the operation expects."""


class FormatError(ValueError):
    """A file (manifest, frame archive, checkpoint, document) is malformed."""


class ConsistencyError(ValueError):
    """Cross-structure reference is broken (e.g. an edge names a missing node)."""


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged: non-finite loss in epoch {epoch}")
        self.epoch = epoch


class PipelineError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")
        self.stage = stage
