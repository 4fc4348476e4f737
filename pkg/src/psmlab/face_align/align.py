import dataclasses
import logging

import numpy as np
import numpy.typing as npt
from skimage.color import rgb2gray
from skimage.transform import SimilarityTransform, warp
from skimage.util import img_as_float32

from psmlab.config import AlignConfig
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.face_align.landmarks import LandmarkSet
from psmlab.outcome import Ok, Result

logger = logging.getLogger(__name__)

# eye centers closer than this (pixels) cannot define a rotation
MIN_EYE_DISTANCE = 1e-3


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class AlignedFrame:
    """A face-centered, eyes-horizontal frame.

    Attributes:
        pixels (np.ndarray): ``out_size x out_size x C`` float32 in [0, 1]
        identity (str): Subject id
        index (int): Frame position in the source video
        transform (np.ndarray): 3x3 homogeneous similarity mapping source (x, y) to aligned (x, y)
    """

    pixels: npt.NDArray[np.float32]
    identity: str
    index: int
    transform: npt.NDArray[np.float64]

    @property
    def size(self) -> int:
        return int(self.pixels.shape[0])


def canonical_eyes(out_size: int, config: AlignConfig) -> npt.NDArray[np.float64]:
    """Target (x, y) of the image-left and image-right eye centers in the aligned frame."""
    center = (out_size - 1) / 2
    half = config.interocular * out_size / 2
    y = config.eye_height * out_size
    return np.array([[center - half, y], [center + half, y]])


def transform_points(points: npt.NDArray[np.float64], transform: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Apply a 3x3 homogeneous transform to ``n x 2`` points."""
    return np.asarray(SimilarityTransform(matrix=transform)(points), dtype=np.float64)


def align_face(
    pixels: npt.NDArray[np.uint8] | npt.NDArray[np.floating],
    landmarks: LandmarkSet,
    out_size: int,
    config: AlignConfig | None = None,
    *,
    identity: str = "",
    index: int = 0,
) -> Result[AlignedFrame, PsmError]:
    """Crop, center and rotate a face so the eyes lie on a horizontal line.

    A similarity transform maps the two eye centers onto fixed positions placed
    symmetrically about the vertical midline; the mouth then falls near the midline.
    Sampling is bilinear and pixels outside the source repeat the border.

    Args:
        pixels (np.ndarray): ``H x W x 3`` uint8 image, or float in [0, 1]
        landmarks (LandmarkSet): Landmarks of the face in ``pixels``
        out_size (int): Side of the aligned output
        config (AlignConfig | None): Canonical geometry; defaults to ``AlignConfig()``
        identity (str): Subject id carried to the output
        index (int): Frame index carried to the output

    Returns:
        Result[AlignedFrame, PsmError]: The aligned frame, or ``DegenerateLandmarks``
    """
    config = config or AlignConfig()
    src = np.stack([landmarks.left_eye, landmarks.right_eye])
    if np.linalg.norm(src[1] - src[0]) < MIN_EYE_DISTANCE:
        return fail(ErrorKind.DEGENERATE_LANDMARKS, "eye centers coincide", identity=identity, index=index)

    tform = SimilarityTransform()
    tform.estimate(src, canonical_eyes(out_size, config))
    image = img_as_float32(pixels)
    if image.ndim == 2:
        image = image[..., None]
    if config.grayscale and image.shape[2] == 3:
        image = rgb2gray(image)[..., None].astype(np.float32)
    out = warp(image, tform.inverse, output_shape=(out_size, out_size), order=1, mode="edge", preserve_range=True)
    return Ok(
        AlignedFrame(
            pixels=np.clip(out, 0.0, 1.0).astype(np.float32),
            identity=identity,
            index=index,
            transform=np.asarray(tform.params, dtype=np.float64),
        ),
    )


def eye_level_gap(landmarks: LandmarkSet, transform: npt.NDArray[np.float64]) -> float:
    """``|y_left - y_right|`` of the eye centers after the transform, in output pixels."""
    eyes = transform_points(np.stack([landmarks.left_eye, landmarks.right_eye]), transform)
    return float(abs(eyes[0, 1] - eyes[1, 1]))
