"""DISFA-format trees on disk.

Default layout (remappable through ``<root>/manifest.yaml``)::

    <root>/<subject>/frames/<index>.png
    <root>/<subject>/labels/<subject>_au<N>.txt     one "frame_index,intensity" line per frame
    <landmarks>/<subject>/<index>.txt               68 "x y" lines (optional)
"""

import dataclasses
import logging
import re
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd
import yaml
from PIL import Image

from psmlab.data_ingest.au import AU_NUMBERS, MAX_INTENSITY, AURecord
from psmlab.data_ingest.dataset import Dataset, DatasetMetadata, FrameRef, LandmarkStatus, read_image
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result, question, result

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = frozenset({".png", ".jpg", ".jpeg", ".bmp"})
MANIFEST_NAME = "manifest.yaml"
N_LANDMARKS = 68
_DIGITS = re.compile(r"(\d+)")


@dataclasses.dataclass(frozen=True, slots=True)
class TreeLayout:
    frames_dir: str = "frames"
    labels_dir: str = "labels"
    label_pattern: str = "{subject}_au{au}.txt"
    subjects: tuple[str, ...] | None = None
    fps: int = 20

    @classmethod
    def read(cls, root: Path) -> Result["TreeLayout", PsmError]:
        path = root / MANIFEST_NAME
        if not path.exists():
            return Ok(cls())
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as e:
            return fail(ErrorKind.INVALID_CONFIG, f"bad dataset manifest {path}: {e}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            return fail(ErrorKind.INVALID_CONFIG, f"unknown keys in {path}: {', '.join(unknown)}")
        if raw.get("subjects") is not None:
            raw["subjects"] = tuple(str(s) for s in raw["subjects"])
        return Ok(cls(**raw))


def frame_index_of(path: Path) -> int | None:
    """Integer frame index from the last run of digits in a file stem."""
    digits = _DIGITS.findall(path.stem)
    return int(digits[-1]) if digits else None


def read_landmark_file(path: Path) -> npt.NDArray[np.float64] | None:
    """68x2 landmarks from a whitespace-separated file, ``None`` when absent or malformed."""
    try:
        points = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except (OSError, ValueError):
        return None
    if points.shape != (N_LANDMARKS, 2) or not np.all(np.isfinite(points)):
        logger.warning("ignoring malformed landmark file %s (shape %s)", path, points.shape)
        return None
    return points


def write_landmark_file(path: Path, points: npt.NDArray[np.float64]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, points, fmt="%.4f")


def _read_au_file(path: Path) -> Result[pd.Series, PsmError]:
    if not path.exists():
        return fail(ErrorKind.MISSING_LABEL_FILE, f"missing AU label file {path}", path=str(path))
    try:
        table = pd.read_csv(path, header=None, names=["frame_index", "intensity"], dtype=np.int64)
    except (ValueError, pd.errors.ParserError) as e:
        return fail(ErrorKind.MISSING_LABEL_FILE, f"unreadable AU label file {path}: {e}", path=str(path))
    if table["frame_index"].duplicated().any():
        return fail(ErrorKind.FRAME_COUNT_MISMATCH, f"duplicate frame indices in {path}", path=str(path))
    outside = np.flatnonzero(~table["intensity"].between(0, MAX_INTENSITY).to_numpy())
    if outside.size:
        row = int(outside[0])
        value = int(table["intensity"].iloc[row])
        return fail(
            ErrorKind.CORRUPT_LABEL,
            f"{path} line {row + 1}: intensity {value} outside 0..{MAX_INTENSITY}",
            path=str(path),
            row=row + 1,
            intensity=value,
        )
    return Ok(table.set_index("frame_index")["intensity"])


@result
def _load_subject(
    root: Path,
    subject: str,
    layout: TreeLayout,
    landmark_dir: Path | None,
    *,
    verify_images: bool,
) -> Result[list[FrameRef], PsmError]:
    frame_dir = root / subject / layout.frames_dir
    images = sorted(
        (p for p in frame_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: frame_index_of(p) or 0,
    ) if frame_dir.is_dir() else []
    indices = [frame_index_of(p) for p in images]
    if any(i is None for i in indices):
        return fail(ErrorKind.INVALID_INPUT, f"frame file without a numeric index under {frame_dir}")

    columns: list[pd.Series] = []
    for au in AU_NUMBERS:
        label_file = root / subject / layout.labels_dir / layout.label_pattern.format(subject=subject, au=au)
        series = question(_read_au_file(label_file))
        if len(series) != len(images):
            return fail(
                ErrorKind.FRAME_COUNT_MISMATCH,
                f"{subject} AU{au}: {len(series)} label rows for {len(images)} frames",
                subject=subject,
                au=au,
                rows=len(series),
                frames=len(images),
            )
        missing = sorted(set(indices) - set(series.index))  # type: ignore[arg-type]
        if missing:
            message = f"{subject} AU{au}: no label for frames {missing[:5]}"
            return fail(ErrorKind.FRAME_COUNT_MISMATCH, message, subject=subject, au=au)
        columns.append(series)

    frames: list[FrameRef] = []
    for path, index in zip(images, indices, strict=True):
        assert index is not None
        if verify_images:
            try:
                with Image.open(path) as image:
                    image.verify()
            except Exception as e:  # noqa: BLE001
                return fail(ErrorKind.CORRUPT_IMAGE, f"cannot decode {path}: {e}", path=str(path))
        landmarks = None
        status = LandmarkStatus.PENDING
        if landmark_dir is not None:
            landmarks = find_landmarks(landmark_dir / subject, index)
            status = LandmarkStatus.PRESENT if landmarks is not None else LandmarkStatus.MISSING
        frames.append(
            FrameRef(
                identity=subject,
                index=index,
                labels=AURecord.of([int(c.loc[index]) for c in columns]),
                landmark_status=status,
                landmarks=landmarks,
                image_path=path,
            ),
        )
    return Ok(frames)


def find_landmarks(directory: Path, index: int) -> npt.NDArray[np.float64] | None:
    """Landmarks of frame ``index`` from ``directory``, trying unpadded then 5- and 6-digit names."""
    for name in (f"{index}.txt", f"{index:05d}.txt", f"{index:06d}.txt"):
        path = directory / name
        if path.exists():
            return read_landmark_file(path)
    return None


@result
def load_disfa(
    root: Path,
    landmark_dir: Path | None = None,
    *,
    verify_images: bool = True,
) -> Result[Dataset, PsmError]:
    """Load a DISFA-format tree.

    Args:
        root (Path): Dataset root with one directory per subject
        landmark_dir (Path | None): Optional per-frame landmark files
        verify_images (bool): Decode-check every image while loading

    Returns:
        Result[Dataset, PsmError]: All 12 AU channels joined per frame, or
        ``MissingLabelFile`` / ``FrameCountMismatch`` / ``CorruptImage``
    """
    if not root.is_dir():
        return fail(ErrorKind.MISSING_LABEL_FILE, f"dataset root {root} does not exist", path=str(root))
    layout = question(TreeLayout.read(root))
    subjects = layout.subjects or tuple(sorted(p.name for p in root.iterdir() if (p / layout.labels_dir).is_dir()))
    if not subjects:
        return fail(ErrorKind.MISSING_LABEL_FILE, f"no subject with a {layout.labels_dir}/ directory under {root}")

    loaded: dict[str, list[FrameRef]] = {}
    for subject in subjects:
        loaded[subject] = question(_load_subject(root, subject, layout, landmark_dir, verify_images=verify_images))
        logger.info("loaded %s: %d frames", subject, len(loaded[subject]))

    first = next((frames[0] for frames in loaded.values() if frames), None)
    size = (0, 0)
    if first is not None:
        pixels = question(first.load_pixels())
        size = (int(pixels.shape[0]), int(pixels.shape[1]))
    return Dataset.create(loaded, "disfa", DatasetMetadata(frame_size=size, fps=layout.fps))


@result
def write_disfa_tree(dataset: Dataset, root: Path, landmark_dir: Path | None = None) -> Result[Path, PsmError]:
    """Write a dataset (typically synthetic) in the default DISFA layout.

    Args:
        dataset (Dataset): Frames to export; pixels must be loadable
        root (Path): Destination root
        landmark_dir (Path | None): Where to write known landmarks, if anywhere

    Returns:
        Result[Path, PsmError]: ``root``
    """
    layout = TreeLayout()
    for identity in dataset.identities:
        frames = dataset.subjects[identity]
        frame_dir = root / identity / layout.frames_dir
        label_dir = root / identity / layout.labels_dir
        frame_dir.mkdir(parents=True, exist_ok=True)
        label_dir.mkdir(parents=True, exist_ok=True)
        for frame in frames:
            pixels = question(frame.load_pixels())
            Image.fromarray(pixels).save(frame_dir / f"{frame.index:05d}.png")
            if landmark_dir is not None and frame.landmarks is not None:
                write_landmark_file(landmark_dir / identity / f"{frame.index:05d}.txt", frame.landmarks)
        intensities = dataset.intensity_matrix(identity)
        index = [f.index for f in frames]
        for col, au in enumerate(AU_NUMBERS):
            table = pd.DataFrame({"frame_index": index, "intensity": intensities[:, col]})
            table.to_csv(label_dir / layout.label_pattern.format(subject=identity, au=au), header=False, index=False)
    (root / MANIFEST_NAME).write_text(
        yaml.safe_dump({"fps": dataset.metadata.fps, "subjects": list(dataset.identities)}),
        encoding="utf-8",
    )
    logger.info("wrote %d subjects to %s", len(dataset.identities), root)
    return Ok(root)


__all__ = [
    "find_landmarks",
    "load_disfa",
    "read_image",
    "read_landmark_file",
    "write_disfa_tree",
    "write_landmark_file",
]
