"""Inference with a frozen bundle.

Images are ``H x W x C`` (or ``N x H x W x C``) float arrays in [0, 1]; codes are float32.
"""

from collections.abc import Callable

import numpy as np
import numpy.typing as npt
import torch

from psmlab.cycle.bundle import ModelBundle
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.face_align import AlignedFrame
from psmlab.outcome import Ok, Result, question, result

FloatArray = npt.NDArray[np.float32]
ImageLike = AlignedFrame | npt.NDArray[np.floating]

INFERENCE_BATCH = 256


def to_tensor(pixels: npt.NDArray[np.floating]) -> torch.Tensor:
    """``N x H x W x C`` array -> contiguous ``N x C x H x W`` float32 tensor."""
    return torch.from_numpy(np.ascontiguousarray(np.asarray(pixels, dtype=np.float32).transpose(0, 3, 1, 2)))


def to_pixels(tensor: torch.Tensor) -> FloatArray:
    return tensor.detach().cpu().numpy().transpose(0, 2, 3, 1).astype(np.float32)


def _pixels_of(image: ImageLike) -> npt.NDArray[np.floating]:
    return image.pixels if isinstance(image, AlignedFrame) else np.asarray(image)


def check_images(bundle: ModelBundle, pixels: npt.NDArray[np.floating]) -> Result[npt.NDArray[np.floating], PsmError]:
    """Accept one image or a batch whose trailing shape matches the bundle; always returns a batch."""
    size, channels = bundle.config.image_size, bundle.config.in_channels
    batch = pixels[None] if pixels.ndim == 3 else pixels
    if batch.ndim != 4 or batch.shape[1:] != (size, size, channels):
        return fail(
            ErrorKind.SHAPE_MISMATCH,
            f"bundle expects {size}x{size}x{channels} images, got {pixels.shape}",
            expected=[size, size, channels],
            got=list(pixels.shape),
        )
    return Ok(batch)


def _batched(pixels: npt.NDArray[np.floating], fn: Callable[[torch.Tensor], torch.Tensor]) -> torch.Tensor:
    chunks = [fn(to_tensor(pixels[i : i + INFERENCE_BATCH])) for i in range(0, len(pixels), INFERENCE_BATCH)]
    return torch.cat(chunks) if chunks else torch.zeros(0)


@result
def encode_batch(bundle: ModelBundle, pixels: npt.NDArray[np.floating]) -> Result[FloatArray, PsmError]:
    """Motion codes of a batch, ``N x embedding_dim``."""
    batch = question(check_images(bundle, pixels))
    if len(batch) == 0:
        return Ok(np.zeros((0, bundle.config.embedding_dim), dtype=np.float32))
    bundle.networks.eval()
    with torch.no_grad():
        codes = _batched(batch, bundle.networks.encode)
    return Ok(codes.numpy().astype(np.float32))


def encode_motion(bundle: ModelBundle, frame: ImageLike) -> Result[FloatArray, PsmError]:
    """The motion embedding of one aligned frame.

    Returns:
        Result[np.ndarray, PsmError]: ``embedding_dim`` finite values, or ``ShapeMismatch``
    """
    pixels = _pixels_of(frame)
    if pixels.ndim != 3:
        return fail(ErrorKind.SHAPE_MISMATCH, f"expected a single H x W x C image, got {pixels.shape}")
    return encode_batch(bundle, pixels).map(lambda codes: codes[0])


@result
def remove_batch(bundle: ModelBundle, pixels: npt.NDArray[np.floating]) -> Result[FloatArray, PsmError]:
    batch = question(check_images(bundle, pixels))
    bundle.networks.eval()
    with torch.no_grad():
        neutral = _batched(batch, bundle.networks.remove)
    return Ok(to_pixels(neutral))


def remove_expression(bundle: ModelBundle, frame: ImageLike) -> Result[FloatArray, PsmError]:
    """The neutral face of one frame, same size as the input, values in [0, 1]."""
    pixels = _pixels_of(frame)
    if pixels.ndim != 3:
        return fail(ErrorKind.SHAPE_MISMATCH, f"expected a single H x W x C image, got {pixels.shape}")
    return remove_batch(bundle, pixels).map(lambda images: images[0])


@result
def retrieve_expression(
    bundle: ModelBundle,
    neutral: npt.NDArray[np.floating],
    motion: npt.NDArray[np.floating],
) -> Result[FloatArray, PsmError]:
    """Put a motion code back onto a neutral face.

    Args:
        bundle (ModelBundle): Model to run
        neutral (np.ndarray): ``H x W x C`` neutral face (or a batch)
        motion (np.ndarray): ``embedding_dim`` code (or ``N x embedding_dim``)

    Returns:
        Result[np.ndarray, PsmError]: The expressive face, or ``ShapeMismatch``/``DimMismatch``
    """
    images = question(check_images(bundle, np.asarray(neutral)))
    codes = np.atleast_2d(np.asarray(motion, dtype=np.float32))
    if codes.shape != (len(images), bundle.config.embedding_dim):
        return fail(
            ErrorKind.DIM_MISMATCH,
            f"expected {len(images)} codes of length {bundle.config.embedding_dim}, got {np.shape(motion)}",
        )
    bundle.networks.eval()
    with torch.no_grad():
        out = bundle.networks.retrieve(to_tensor(images), torch.from_numpy(codes))
    result_pixels = to_pixels(out)
    return Ok(result_pixels[0] if np.asarray(neutral).ndim == 3 else result_pixels)
