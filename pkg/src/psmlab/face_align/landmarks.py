"""68-point landmark sets and the pluggable sources that provide them."""

import dataclasses
import logging
import subprocess
import tempfile
from pathlib import Path
from typing import Protocol

import numpy as np
import numpy.typing as npt
from PIL import Image

from psmlab.data_ingest.dataset import FrameRef, LandmarkStatus
from psmlab.data_ingest.disfa import N_LANDMARKS, find_landmarks
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

# iBUG 68 index ranges
LEFT_EYE = slice(36, 42)
RIGHT_EYE = slice(42, 48)
MOUTH = slice(48, 68)
BOUNDS_MARGIN = 0.10


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class LandmarkSet:
    """68 (x, y) points in source-image pixel coordinates.

    ``left_eye`` is the eye on the image left (iBUG points 36-41).
    """

    points: FloatArray

    @classmethod
    def create(cls, points: npt.ArrayLike, image_shape: tuple[int, ...]) -> Result["LandmarkSet", PsmError]:
        """Validate count, finiteness and that every point lies within the image bounds plus a 10% margin."""
        array = np.asarray(points, dtype=np.float64)
        if array.shape != (N_LANDMARKS, 2):
            return fail(ErrorKind.INVALID_INPUT, f"expected {N_LANDMARKS}x2 landmarks, got {array.shape}")
        if not np.all(np.isfinite(array)):
            return fail(ErrorKind.INVALID_INPUT, "landmarks contain non-finite coordinates")
        height, width = image_shape[0], image_shape[1]
        mx, my = BOUNDS_MARGIN * width, BOUNDS_MARGIN * height
        inside = (
            (array[:, 0] >= -mx)
            & (array[:, 0] <= width - 1 + mx)
            & (array[:, 1] >= -my)
            & (array[:, 1] <= height - 1 + my)
        )
        if not np.all(inside):
            return fail(
                ErrorKind.INVALID_INPUT,
                f"{int((~inside).sum())} landmarks lie outside the {width}x{height} image",
                outside=int((~inside).sum()),
            )
        array.setflags(write=False)
        return Ok(cls(array))

    @property
    def left_eye(self) -> FloatArray:
        return self.points[LEFT_EYE].mean(axis=0)

    @property
    def right_eye(self) -> FloatArray:
        return self.points[RIGHT_EYE].mean(axis=0)

    @property
    def mouth(self) -> FloatArray:
        return self.points[MOUTH].mean(axis=0)


class LandmarkSource(Protocol):
    """Anything that can locate 68 landmarks on a frame; ``None`` means no face was found."""

    def locate(self, frame: FrameRef, pixels: npt.NDArray[np.uint8]) -> FloatArray | None: ...


class FrameLandmarks:
    """Landmarks already attached to the frame: precomputed files read at ingest, or synthetic ground truth."""

    def locate(self, frame: FrameRef, pixels: npt.NDArray[np.uint8]) -> FloatArray | None:  # noqa: ARG002
        if frame.landmark_status is LandmarkStatus.MISSING:
            return None
        return frame.landmarks


@dataclasses.dataclass(frozen=True, slots=True)
class LandmarkDirectory:
    """Precomputed files ``<root>/<identity>/<index>.txt`` (zero padding to 5 or 6 digits also accepted)."""

    root: Path

    def locate(self, frame: FrameRef, pixels: npt.NDArray[np.uint8]) -> FloatArray | None:  # noqa: ARG002
        return find_landmarks(self.root / frame.identity, frame.index)


@dataclasses.dataclass(frozen=True, slots=True)
class ExternalDetector:
    """An external detector program.

    The program is called as ``command... <image.png>`` and must print 68 ``x y`` lines
    on stdout. A non-zero exit or unparsable output means no face. Images without any
    pixel variation are never sent to the detector.
    """

    command: tuple[str, ...]
    timeout: float = 30.0

    def locate(self, frame: FrameRef, pixels: npt.NDArray[np.uint8]) -> FloatArray | None:
        if np.ptp(pixels) == 0:
            return None
        with tempfile.TemporaryDirectory(prefix="psmlab-detect-") as tmp:
            path = Path(tmp) / f"{frame.identity}_{frame.index}.png"
            Image.fromarray(pixels).save(path)
            try:
                completed = subprocess.run(  # noqa: S603
                    [*self.command, str(path)],
                    capture_output=True,
                    text=True,
                    timeout=self.timeout,
                    check=False,
                )
            except (OSError, subprocess.TimeoutExpired) as e:
                logger.warning("landmark detector failed on %s: %s", frame.key, e)
                return None
        if completed.returncode != 0:
            logger.debug("detector found no face on %s (exit %d)", frame.key, completed.returncode)
            return None
        try:
            rows = [line.split() for line in completed.stdout.splitlines() if line.strip()]
            points = np.array([[float(v) for v in row] for row in rows])
        except ValueError:
            return None
        return points if points.shape == (N_LANDMARKS, 2) else None


def detect_landmarks(
    frame: FrameRef,
    pixels: npt.NDArray[np.uint8],
    source: LandmarkSource,
) -> Result[LandmarkSet, PsmError] | None:
    """Landmarks of one frame.

    Never raises. ``None`` means the source found no face; an ``Err`` carries the reason the
    points it found were rejected. Both count as a missing landmark set.
    """
    points = source.locate(frame, pixels)
    if points is None:
        return None
    checked = LandmarkSet.create(points, pixels.shape)
    if checked.is_err():
        logger.debug("rejecting landmarks of %s: %s", frame.key, checked.unwrap_err())
    return checked
