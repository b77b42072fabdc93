"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class EmbryoNetError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(EmbryoNetError, ValueError):
    """Two tensors (or a tensor and a layer) disagree about shape."""

    def __init__(self, message: str, *shapes):
        self.shapes = tuple(tuple(s) for s in shapes)
        if shapes:
            message = f"{message} (shapes: {', '.join(str(s) for s in self.shapes)})"
        super().__init__(message)


class DistributionError(EmbryoNetError, ValueError):
    """A target vector is not a probability distribution."""


class GradeError(EmbryoNetError, ValueError):
    """Panel grades are malformed (wrong count or out of 1..5)."""


class MissingGradientError(EmbryoNetError, KeyError):
    """An optimizer step was requested without a gradient for some parameter."""


class SpecError(EmbryoNetError, ValueError):
    """An encoder spec cannot be built; ``layer`` is the offending index."""

    def __init__(self, message: str, layer: int | None = None):
        self.layer = layer
        if layer is not None:
            message = f"layer {layer}: {message}"
        super().__init__(message)


class EmptyInputError(EmbryoNetError, ValueError):
    """An operation that needs data was given none."""


class WrongHeadError(EmbryoNetError, TypeError):
    """A sequence model was used with the head it does not carry."""


class SingleClassError(EmbryoNetError, ValueError):
    """Only one label class present where both are required."""


class FoldError(EmbryoNetError, ValueError):
    """Invalid cross-validation request (too few patients, bad fold index)."""


class LeakageError(EmbryoNetError, AssertionError):
    """A patient appears on both sides of a train/validation boundary."""


class DatasetError(EmbryoNetError):
    """A dataset directory is missing files or disagrees with its manifest."""

    def __init__(self, message: str, path=None, embryo_id: str | None = None):
        self.path = path
        self.embryo_id = embryo_id
        parts = [message]
        if embryo_id is not None:
            parts.append(f"embryo_id={embryo_id}")
        if path is not None:
            parts.append(f"path={path}")
        super().__init__("; ".join(parts))


class CheckpointError(EmbryoNetError):
    """Base for checkpoint load failures."""


class CheckpointFormatError(CheckpointError):
    """Bad magic bytes or an unparseable header."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint written by an unsupported format version."""


class CheckpointShapeError(CheckpointError):
    """Declared tensor shapes disagree with the model they describe."""


class CheckpointTruncatedError(CheckpointError):
    """Payload shorter (or longer) than the header declares."""


class ConfigError(EmbryoNetError, ValueError):
    """Unknown key or unparseable value in a config file."""


class StageError(EmbryoNetError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


class ReportError(EmbryoNetError):
    """A report could not be written."""
