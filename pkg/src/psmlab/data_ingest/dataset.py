import dataclasses
import enum
from collections.abc import Iterator, Mapping
from pathlib import Path
from types import MappingProxyType
from typing import Literal

import numpy as np
import numpy.typing as npt
from PIL import Image, UnidentifiedImageError

from psmlab.data_ingest.au import N_AUS, AURecord
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result

DatasetSource = Literal["disfa", "synthetic"]


class LandmarkStatus(enum.StrEnum):
    PRESENT = "present"
    MISSING = "missing"
    # no landmark file was given; a detector decides at alignment time
    PENDING = "pending"


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class FrameRef:
    """One video frame of one subject.

    Pixels are either held in memory (synthetic data) or read lazily from ``image_path``.

    Attributes:
        identity (str): Subject id, e.g. ``SN001``
        index (int): Frame position in the video
        labels (AURecord): AU intensities of the frame
        landmark_status (LandmarkStatus): Whether 68 landmarks are known for the frame
        landmarks (np.ndarray | None): 68x2 pixel coordinates when known
        pixels (np.ndarray | None): HxWx3 uint8 image when held in memory
        image_path (Path | None): Image file otherwise
    """

    identity: str
    index: int
    labels: AURecord
    landmark_status: LandmarkStatus = LandmarkStatus.PENDING
    landmarks: npt.NDArray[np.float64] | None = None
    pixels: npt.NDArray[np.uint8] | None = None
    image_path: Path | None = None

    @property
    def key(self) -> tuple[str, int]:
        return (self.identity, self.index)

    def load_pixels(self) -> Result[npt.NDArray[np.uint8], PsmError]:
        """HxWx3 uint8 pixels of the frame (grayscale files are expanded to three channels)."""
        if self.pixels is not None:
            return Ok(self.pixels)
        if self.image_path is None:
            return fail(ErrorKind.INVALID_INPUT, f"frame {self.key} has neither pixels nor an image path")
        return read_image(self.image_path)


def read_image(path: Path) -> Result[npt.NDArray[np.uint8], PsmError]:
    try:
        with Image.open(path) as image:
            return Ok(np.asarray(image.convert("RGB"), dtype=np.uint8))
    except FileNotFoundError:
        return fail(ErrorKind.IO_FAILURE, f"image not found: {path}", path=str(path))
    except (UnidentifiedImageError, OSError) as e:
        return fail(ErrorKind.CORRUPT_IMAGE, f"cannot decode image {path}: {e}", path=str(path))


@dataclasses.dataclass(frozen=True, slots=True)
class DatasetMetadata:
    """Frame size (height, width), frame rate and, for synthetic data, the latent motion factors."""

    frame_size: tuple[int, int]
    fps: int = 20
    latent_factors: Mapping[str, npt.NDArray[np.float64]] = dataclasses.field(
        default_factory=lambda: MappingProxyType({}),
    )


@dataclasses.dataclass(frozen=True, slots=True)
class Dataset:
    """Immutable collection of per-subject frame sequences.

    Use ``Dataset.create`` to build one; it checks ordering and label invariants.
    """

    subjects: Mapping[str, tuple[FrameRef, ...]]
    source: DatasetSource
    metadata: DatasetMetadata

    @classmethod
    def create(
        cls,
        subjects: Mapping[str, list[FrameRef] | tuple[FrameRef, ...]],
        source: DatasetSource,
        metadata: DatasetMetadata,
    ) -> Result["Dataset", PsmError]:
        frozen: dict[str, tuple[FrameRef, ...]] = {}
        for identity in sorted(subjects):
            frames = tuple(subjects[identity])
            indices = np.array([f.index for f in frames])
            if len(indices) > 1 and not np.all(np.diff(indices) > 0):
                return fail(ErrorKind.INVALID_INPUT, f"frames of {identity} are not strictly increasing in index")
            if any(f.identity != identity for f in frames):
                return fail(ErrorKind.INVALID_INPUT, f"frame listed under {identity} belongs to another identity")
            frozen[identity] = frames
        return Ok(cls(MappingProxyType(frozen), source, metadata))

    @property
    def identities(self) -> tuple[str, ...]:
        return tuple(sorted(self.subjects))

    def __len__(self) -> int:
        return sum(len(frames) for frames in self.subjects.values())

    def __iter__(self) -> Iterator[FrameRef]:
        for identity in self.identities:
            yield from self.subjects[identity]

    def frames(self, identity: str) -> Result[tuple[FrameRef, ...], PsmError]:
        if identity not in self.subjects:
            return fail(ErrorKind.UNKNOWN_IDENTITY, f"no subject {identity!r} in dataset", known=list(self.identities))
        return Ok(self.subjects[identity])

    def intensity_matrix(self, identity: str) -> npt.NDArray[np.int64]:
        frames = self.subjects[identity]
        if not frames:
            return np.zeros((0, N_AUS), dtype=np.int64)
        return np.array([f.labels.intensities for f in frames], dtype=np.int64)

    def label_matrix(self, identity: str) -> npt.NDArray[np.bool_]:
        return self.intensity_matrix(identity) > 1

    def discard_ratio(self) -> float:
        total = len(self)
        if total == 0:
            return 0.0
        missing = sum(1 for f in self if f.landmark_status is LandmarkStatus.MISSING)
        return missing / total

    def subset(self, identities: list[str] | tuple[str, ...]) -> Result["Dataset", PsmError]:
        unknown = [i for i in identities if i not in self.subjects]
        if unknown:
            return fail(ErrorKind.UNKNOWN_IDENTITY, f"unknown subjects: {', '.join(unknown)}")
        return Dataset.create({i: self.subjects[i] for i in identities}, self.source, self.metadata)
