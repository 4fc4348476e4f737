"""Alignment of whole videos and the on-disk aligned corpus."""

import dataclasses
import enum
import json
import logging
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from types import MappingProxyType
from typing import Any

import numpy as np
import numpy.typing as npt

from psmlab.config import AlignConfig
from psmlab.data_ingest.au import N_AUS, binarize
from psmlab.data_ingest.dataset import Dataset, FrameRef
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.face_align.align import AlignedFrame, align_face
from psmlab.face_align.landmarks import LandmarkSource, detect_landmarks
from psmlab.outcome import Ok, Result

logger = logging.getLogger(__name__)

DISCARD_LOG = "discard_log.json"


class DiscardReason(enum.StrEnum):
    NO_FACE = "no_face"
    INVALID_LANDMARKS = "invalid_landmarks"
    DEGENERATE_LANDMARKS = "degenerate_landmarks"
    UNREADABLE = "unreadable"


@dataclasses.dataclass(frozen=True, slots=True)
class DiscardEntry:
    index: int
    reason: DiscardReason
    detail: str = ""


def _align_one(
    frame: FrameRef,
    source: LandmarkSource,
    out_size: int,
    config: AlignConfig,
) -> AlignedFrame | DiscardEntry:
    loaded = frame.load_pixels()
    if loaded.is_err():
        return DiscardEntry(frame.index, DiscardReason.UNREADABLE, str(loaded.unwrap_err()))
    pixels = loaded.unwrap()
    landmarks = detect_landmarks(frame, pixels, source)
    if landmarks is None:
        return DiscardEntry(frame.index, DiscardReason.NO_FACE)
    if landmarks.is_err():
        return DiscardEntry(frame.index, DiscardReason.INVALID_LANDMARKS, landmarks.unwrap_err().message)
    aligned = align_face(pixels, landmarks.unwrap(), out_size, config, identity=frame.identity, index=frame.index)
    if aligned.is_err():
        return DiscardEntry(frame.index, DiscardReason.DEGENERATE_LANDMARKS)
    return aligned.unwrap()


def preprocess_sequence(
    frames: Sequence[FrameRef],
    source: LandmarkSource,
    out_size: int,
    config: AlignConfig | None = None,
    *,
    workers: int = 1,
) -> tuple[list[AlignedFrame], list[DiscardEntry]]:
    """Align every frame of a video, discarding the ones without usable landmarks.

    Args:
        frames (Sequence[FrameRef]): Frames in video order
        source (LandmarkSource): Where landmarks come from
        out_size (int): Side of the aligned frames
        config (AlignConfig | None): Canonical geometry
        workers (int): Threads used for per-frame alignment; output order never depends on it

    Returns:
        tuple[list[AlignedFrame], list[DiscardEntry]]: Aligned frames in input order and the
        discarded frame indices with their reason
    """
    config = config or AlignConfig()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda f: _align_one(f, source, out_size, config), frames))
    else:
        outcomes = [_align_one(f, source, out_size, config) for f in frames]
    aligned = [o for o in outcomes if isinstance(o, AlignedFrame)]
    discarded = [o for o in outcomes if isinstance(o, DiscardEntry)]
    if discarded:
        logger.info("discarded %d of %d frames", len(discarded), len(frames))
    return aligned, discarded


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class AlignedSequence:
    """The aligned frames of one subject as stacked arrays.

    Attributes:
        identity (str): Subject id
        pixels (np.ndarray): ``N x H x W x C`` float32 in [0, 1]
        indices (np.ndarray): Source frame index of each row, strictly increasing
        intensities (np.ndarray): ``N x 12`` AU intensities
        transforms (np.ndarray): ``N x 3 x 3`` alignment transforms
    """

    identity: str
    pixels: npt.NDArray[np.float32]
    indices: npt.NDArray[np.int64]
    intensities: npt.NDArray[np.int64]
    transforms: npt.NDArray[np.float64]

    def __len__(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def labels(self) -> npt.NDArray[np.bool_]:
        return binarize(self.intensities)

    @property
    def image_size(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def channels(self) -> int:
        return int(self.pixels.shape[3])

    def take(self, rows: npt.NDArray[np.int64] | Sequence[int]) -> "AlignedSequence":
        rows = np.asarray(rows, dtype=np.int64)
        return AlignedSequence(
            self.identity,
            self.pixels[rows],
            self.indices[rows],
            self.intensities[rows],
            self.transforms[rows],
        )

    def frame(self, row: int) -> AlignedFrame:
        return AlignedFrame(self.pixels[row], self.identity, int(self.indices[row]), self.transforms[row])

    @classmethod
    def from_frames(
        cls,
        identity: str,
        aligned: Sequence[AlignedFrame],
        frames: Sequence[FrameRef],
        out_size: int,
        channels: int,
    ) -> "AlignedSequence":
        by_index = {f.index: f for f in frames}
        if not aligned:
            return cls(
                identity,
                np.zeros((0, out_size, out_size, channels), dtype=np.float32),
                np.zeros(0, dtype=np.int64),
                np.zeros((0, N_AUS), dtype=np.int64),
                np.zeros((0, 3, 3)),
            )
        return cls(
            identity,
            np.stack([a.pixels for a in aligned]).astype(np.float32),
            np.array([a.index for a in aligned], dtype=np.int64),
            np.array([by_index[a.index].labels.intensities for a in aligned], dtype=np.int64),
            np.stack([a.transform for a in aligned]),
        )


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class AlignedCorpus:
    """Aligned sequences of every subject plus the per-subject discard log."""

    sequences: Mapping[str, AlignedSequence]
    discard_log: Mapping[str, tuple[DiscardEntry, ...]]
    total_frames: int

    @property
    def identities(self) -> tuple[str, ...]:
        return tuple(sorted(self.sequences))

    @property
    def image_size(self) -> int:
        return next(iter(self.sequences.values())).image_size

    @property
    def channels(self) -> int:
        return next(iter(self.sequences.values())).channels

    def sequence(self, identity: str) -> Result[AlignedSequence, PsmError]:
        if identity not in self.sequences:
            return fail(ErrorKind.UNKNOWN_IDENTITY, f"no subject {identity!r} in corpus", known=list(self.identities))
        return Ok(self.sequences[identity])

    def discard_ratio(self) -> float:
        discarded = sum(len(v) for v in self.discard_log.values())
        return discarded / self.total_frames if self.total_frames else 0.0

    def subset(self, identities: Sequence[str]) -> Result["AlignedCorpus", PsmError]:
        unknown = [i for i in identities if i not in self.sequences]
        if unknown:
            return fail(ErrorKind.UNKNOWN_IDENTITY, f"unknown subjects: {', '.join(unknown)}")
        sequences = {i: self.sequences[i] for i in identities}
        log = {i: self.discard_log.get(i, ()) for i in identities}
        total = sum(len(s) for s in sequences.values()) + sum(len(v) for v in log.values())
        return Ok(AlignedCorpus(MappingProxyType(sequences), MappingProxyType(log), total))

    def save(self, directory: Path) -> Result[Path, PsmError]:
        """Write ``<subject>.npz`` per subject (pixels as uint8) and ``discard_log.json``."""
        try:
            directory.mkdir(parents=True, exist_ok=True)
            for identity, seq in self.sequences.items():
                np.savez_compressed(
                    directory / f"{identity}.npz",
                    pixels=np.round(seq.pixels * 255.0).astype(np.uint8),
                    indices=seq.indices,
                    intensities=seq.intensities,
                    transforms=seq.transforms,
                )
            log: dict[str, Any] = {
                "total_frames": self.total_frames,
                "discard_ratio": self.discard_ratio(),
                "subjects": {
                    i: [{"index": e.index, "reason": str(e.reason), "detail": e.detail} for e in entries]
                    for i, entries in sorted(self.discard_log.items())
                },
            }
            (directory / DISCARD_LOG).write_text(json.dumps(log, indent=2, sort_keys=True), encoding="utf-8")
        except OSError as e:
            return fail(ErrorKind.IO_FAILURE, f"cannot write aligned corpus to {directory}: {e}")
        return Ok(directory)

    @classmethod
    def load(cls, directory: Path) -> Result["AlignedCorpus", PsmError]:
        files = sorted(directory.glob("*.npz")) if directory.is_dir() else []
        if not files:
            return fail(ErrorKind.EMPTY_DATASET, f"no aligned sequences under {directory}", path=str(directory))
        sequences: dict[str, AlignedSequence] = {}
        try:
            for path in files:
                with np.load(path) as data:
                    sequences[path.stem] = AlignedSequence(
                        identity=path.stem,
                        pixels=(data["pixels"].astype(np.float32) / 255.0),
                        indices=data["indices"].astype(np.int64),
                        intensities=data["intensities"].astype(np.int64),
                        transforms=data["transforms"].astype(np.float64),
                    )
            log_path = directory / DISCARD_LOG
            raw = json.loads(log_path.read_text(encoding="utf-8")) if log_path.exists() else {}
        except (OSError, KeyError, ValueError) as e:
            return fail(ErrorKind.IO_FAILURE, f"cannot read aligned corpus {directory}: {e}")
        log = {
            i: tuple(DiscardEntry(int(e["index"]), DiscardReason(e["reason"]), e.get("detail", "")) for e in entries)
            for i, entries in raw.get("subjects", {}).items()
        }
        total = int(raw.get("total_frames", sum(len(s) for s in sequences.values())))
        return Ok(cls(MappingProxyType(sequences), MappingProxyType(log), total))


def align_dataset(
    dataset: Dataset,
    source: LandmarkSource,
    config: AlignConfig | None = None,
    *,
    workers: int = 1,
) -> Result[AlignedCorpus, PsmError]:
    """Align every subject of a dataset.

    Returns:
        Result[AlignedCorpus, PsmError]: The corpus, or ``EmptyDataset`` when nothing could be aligned
    """
    config = config or AlignConfig()
    if len(dataset) == 0:
        return fail(ErrorKind.EMPTY_DATASET, "dataset has no frames to align")
    channels = 1 if config.grayscale else 3
    sequences: dict[str, AlignedSequence] = {}
    log: dict[str, tuple[DiscardEntry, ...]] = {}
    for identity in dataset.identities:
        frames = dataset.subjects[identity]
        aligned, discarded = preprocess_sequence(frames, source, config.out_size, config, workers=workers)
        sequences[identity] = AlignedSequence.from_frames(identity, aligned, frames, config.out_size, channels)
        log[identity] = tuple(discarded)
        logger.info("aligned %s: %d kept, %d discarded", identity, len(aligned), len(discarded))
    if all(len(s) == 0 for s in sequences.values()):
        return fail(ErrorKind.EMPTY_DATASET, "no frame could be aligned", total=len(dataset))
    corpus = AlignedCorpus(MappingProxyType(sequences), MappingProxyType(log), len(dataset))
    logger.info("discard ratio %.4f over %d frames", corpus.discard_ratio(), len(dataset))
    return Ok(corpus)
