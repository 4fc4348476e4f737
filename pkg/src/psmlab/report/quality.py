"""Qualitative checks of generated neutral faces."""

import dataclasses
import logging
from typing import Any

import numpy as np
import numpy.typing as npt

from psmlab.cycle import ModelBundle, remove_batch
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result, question, result

logger = logging.getLogger(__name__)

# distances are reported on a 0-255 pixel scale
PIXEL_SCALE = 255.0
NOISE_PERCENTILE = 95.0
NOISE_PASS_FRACTION = 0.95


def pixel_distance(a: npt.NDArray[np.floating], b: npt.NDArray[np.floating]) -> npt.NDArray[np.float64]:
    """Per-pixel euclidean distance over channels, averaged over pixels (broadcasts over leading axes)."""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return np.sqrt((diff**2).sum(axis=-1)).mean(axis=(-2, -1))


@result
def neutral_consistency(bundle: ModelBundle, frames: npt.NDArray[np.floating]) -> Result[float, PsmError]:
    """Mean pairwise distance between the neutral faces generated from ``frames``.

    Args:
        bundle (ModelBundle): Model whose neutral generator is checked
        frames (np.ndarray): ``N x H x W x C`` aligned frames of one person, values in [0, 1]

    Returns:
        Result[float, PsmError]: Mean over unordered pairs on the 0-255 scale, or ``TooFewFrames``
    """
    if len(frames) < 2:  # noqa: PLR2004
        return fail(ErrorKind.TOO_FEW_FRAMES, "neutral consistency needs at least 2 frames", count=len(frames))
    neutrals = question(remove_batch(bundle, frames)).astype(np.float64) * PIXEL_SCALE
    total = 0.0
    for i in range(len(neutrals) - 1):
        total += float(pixel_distance(neutrals[i + 1 :], neutrals[i]).sum())
    pairs = len(neutrals) * (len(neutrals) - 1) // 2
    return Ok(total / pairs)


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class NoiseReport:
    """Distances of noise-input neutrals to the person's mean real-frame neutral."""

    n_noise: int
    threshold: float
    noise_distances: npt.NDArray[np.float64]
    real_distances: npt.NDArray[np.float64]
    fraction_beyond: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_noise": self.n_noise,
            "threshold": self.threshold,
            "fraction_beyond": self.fraction_beyond,
            "passed": self.passed,
            "noise_distances": self.noise_distances.tolist(),
            "real_distances": self.real_distances.tolist(),
        }


@result
def noise_check(
    bundle: ModelBundle,
    n_noise_images: int,
    reference_frames: npt.NDArray[np.floating],
    seed: int = 0,
) -> Result[NoiseReport, PsmError]:
    """Check that uniform noise does not produce a plausible neutral face.

    The threshold is the 95th percentile of the real frames' neutral distances to their
    mean neutral. The check passes when at least 95% of the noise neutrals lie beyond it.

    Args:
        bundle (ModelBundle): Trained bundle; an untrained one only logs a warning
        n_noise_images (int): Number of uniform-noise inputs
        reference_frames (np.ndarray): Real aligned frames of the person
        seed (int): Noise seed

    Returns:
        Result[NoiseReport, PsmError]: The report, or ``InvalidParams`` when ``n_noise_images < 1``
    """
    if n_noise_images < 1:
        return fail(ErrorKind.INVALID_PARAMS, "noise check needs at least one noise image", n=n_noise_images)
    if len(reference_frames) < 2:  # noqa: PLR2004
        return fail(ErrorKind.TOO_FEW_FRAMES, "noise check needs at least 2 reference frames")
    if bundle.provenance.total_epochs == 0:
        logger.warning("%s: noise check on a bundle with no training epochs", ErrorKind.UNTRAINED_BUNDLE)
    real = question(remove_batch(bundle, reference_frames)).astype(np.float64) * PIXEL_SCALE
    center = real.mean(axis=0)
    real_distances = pixel_distance(real, center)
    threshold = float(np.percentile(real_distances, NOISE_PERCENTILE))

    rng = np.random.default_rng(seed)
    noise = rng.uniform(0.0, 1.0, size=(n_noise_images, *reference_frames.shape[1:])).astype(np.float32)
    noise_distances = pixel_distance(question(remove_batch(bundle, noise)).astype(np.float64) * PIXEL_SCALE, center)
    fraction = float(np.mean(noise_distances > threshold))
    logger.info("noise check: %.1f%% of noise neutrals beyond %.2f", 100 * fraction, threshold)
    return Ok(
        NoiseReport(
            n_noise_images,
            threshold,
            noise_distances,
            real_distances,
            fraction,
            fraction >= NOISE_PASS_FRACTION,
        ),
    )
