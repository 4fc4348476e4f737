import dataclasses
import enum
from collections.abc import Mapping
from types import MappingProxyType
from typing import TypeVar

from psmlab.outcome import Err, Result

T = TypeVar("T")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class ErrorKind(enum.StrEnum):
    """Failure kinds reported by psmlab operations."""

    MISSING_LABEL_FILE = "MissingLabelFile"
    FRAME_COUNT_MISMATCH = "FrameCountMismatch"
    CORRUPT_IMAGE = "CorruptImage"
    CORRUPT_LABEL = "CorruptLabel"
    INVALID_CONFIG = "InvalidConfig"
    TOO_FEW_FRAMES = "TooFewFrames"
    TOO_FEW_IDENTITIES = "TooFewIdentities"
    EMPTY_DATASET = "EmptyDataset"
    DEGENERATE_LANDMARKS = "DegenerateLandmarks"
    SHAPE_MISMATCH = "ShapeMismatch"
    DIM_MISMATCH = "DimMismatch"
    NON_FINITE_LOSS = "NonFiniteLoss"
    UNKNOWN_IDENTITY = "UnknownIdentity"
    CONFIG_MISMATCH = "ConfigMismatch"
    SEQUENCE_TOO_SHORT = "SequenceTooShort"
    DEGENERATE_LABELS = "DegenerateLabels"
    LENGTH_MISMATCH = "LengthMismatch"
    TOO_FEW_SAMPLES = "TooFewSamples"
    INVALID_PARAMS = "InvalidParams"
    TOO_FEW_POINTS = "TooFewPoints"
    ZERO_VARIANCE = "ZeroVariance"
    EMPTY_SIDE = "EmptySide"
    SCHEMA_MISMATCH = "SchemaMismatch"
    UNTRAINED_BUNDLE = "UntrainedBundle"
    INVALID_INPUT = "InvalidInput"
    IO_FAILURE = "IoFailure"
    UNSUPPORTED_FEATURE = "UnsupportedFeature"

    @property
    def is_runtime(self) -> bool:
        """True for numeric and I/O failures, False for validation failures."""
        return self in _RUNTIME_KINDS

    @property
    def exit_code(self) -> int:
        return EXIT_RUNTIME if self.is_runtime else EXIT_VALIDATION


_RUNTIME_KINDS = frozenset({ErrorKind.NON_FINITE_LOSS, ErrorKind.IO_FAILURE, ErrorKind.CORRUPT_IMAGE})


@dataclasses.dataclass(frozen=True, slots=True)
class PsmError:
    """Failure payload carried by ``Err``.

    Attributes:
        kind (ErrorKind): What went wrong
        message (str): Human readable description
        details (Mapping[str, object]): Machine readable context (paths, counts, names)
    """

    kind: ErrorKind
    message: str
    details: Mapping[str, object] = dataclasses.field(default_factory=lambda: MappingProxyType({}))

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"

    def __hash__(self) -> int:
        return hash((self.kind, self.message))

    def to_dict(self) -> dict[str, object]:
        details = {k: _plain(v) for k, v in self.details.items()}
        return {"kind": str(self.kind), "message": self.message, "details": details}


def fail(kind: ErrorKind, message: str, **details: object) -> Result[T, PsmError]:
    """Build an ``Err`` carrying a ``PsmError``.

    Example:
        >>> fail(ErrorKind.TOO_FEW_FRAMES, "need at least 10 frames", count=5)
        Err(PsmError(kind=<ErrorKind.TOO_FEW_FRAMES: 'TooFewFrames'>, ...))
    """
    return Err(PsmError(kind, message, MappingProxyType(dict(details))))


def _plain(value: object) -> object:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return str(value)
