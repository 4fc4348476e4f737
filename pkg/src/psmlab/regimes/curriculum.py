"""Temporal pair sampling, optionally with a growing maximum frame distance."""

import math
from collections.abc import Sized

import numpy as np
import numpy.typing as npt

from psmlab.config import CurriculumConfig
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result

IndexArray = npt.NDArray[np.int64]


def curriculum_distance(epoch: int, config: CurriculumConfig) -> int:
    """Maximum temporal distance between paired frames at ``epoch``.

    ``linear`` ramps from ``d_min`` to ``d_max`` over ``ramp_epochs``; ``staircase`` climbs in
    ``steps`` equal jumps. Both are ``d_max`` from ``ramp_epochs`` on.

    Example:
        >>> curriculum_distance(50, CurriculumConfig(d_min=1, d_max=101, ramp_epochs=100))
        51
    """
    assert epoch >= 0, f"negative epoch {epoch}"
    span = config.d_max - config.d_min
    if config.ramp_epochs == 0 or epoch >= config.ramp_epochs:
        return config.d_max
    if config.shape == "staircase":
        level = min(config.steps, epoch * config.steps // config.ramp_epochs)
        return config.d_min + math.floor(span * level / config.steps + 0.5)
    return config.d_min + math.floor(span * epoch / config.ramp_epochs + 0.5)


def sample_pairs(
    length: int,
    count: int,
    epoch: int,
    curriculum: CurriculumConfig | None,
    rng: np.random.Generator,
    *,
    frames: npt.ArrayLike | None = None,
) -> Result[tuple[IndexArray, IndexArray], PsmError]:
    """``count`` row pairs ``(i, j)``, ``i != j``, from a sequence of ``length`` rows.

    ``frames`` holds the increasing source frame index of each row (``0..length-1`` when
    omitted); curriculum distances are measured on it, so a subsampled video keeps its
    temporal scale. With a curriculum a frame gap ``g`` is drawn uniformly from
    ``[1, min(d(epoch), span)]``, the anchor row uniformly among rows with a frame ``g``
    further on, and the partner is the last row at most ``g`` frames after the anchor. When
    no row lies that close, the partner is the next row. The order inside a pair is random.
    Without a curriculum, pairs are uniform over all ordered pairs.
    """
    if length < 2:  # noqa: PLR2004
        return fail(ErrorKind.SEQUENCE_TOO_SHORT, f"cannot pair frames of a {length}-frame sequence", length=length)
    if curriculum is None:
        i = rng.integers(0, length, size=count)
        j = rng.integers(0, length - 1, size=count)
        j = np.where(j >= i, j + 1, j)
        return Ok((i.astype(np.int64), j.astype(np.int64)))
    index = np.arange(length, dtype=np.int64) if frames is None else np.asarray(frames, dtype=np.int64)
    if index.shape != (length,) or np.any(np.diff(index) <= 0):
        return fail(ErrorKind.LENGTH_MISMATCH, f"frames must be {length} increasing indices", length=length)
    limit = min(curriculum_distance(epoch, curriculum), int(index[-1] - index[0]))
    gap = rng.integers(1, limit + 1, size=count)
    anchors = np.searchsorted(index, index[-1] - gap, side="right")
    i = np.floor(rng.random(count) * anchors).astype(np.int64)
    j = np.maximum(np.searchsorted(index, index[i] + gap, side="right") - 1, i + 1)
    swap = rng.random(count) < 0.5  # noqa: PLR2004
    return Ok((np.where(swap, j, i).astype(np.int64), np.where(swap, i, j).astype(np.int64)))


def sample_pair(
    sequence: Sized,
    epoch: int,
    curriculum: CurriculumConfig | None,
    rng: np.random.Generator,
) -> Result[tuple[int, int], PsmError]:
    """One same-sequence pair of row positions.

    Example:
        >>> rng = np.random.default_rng(0)
        >>> sample_pair(range(5), 0, CurriculumConfig(), rng).map(lambda p: abs(p[0] - p[1])).unwrap()
        1
    """
    return sample_pairs(len(sequence), 1, epoch, curriculum, rng).map(lambda ij: (int(ij[0][0]), int(ij[1][0])))
