import logging
from collections.abc import Sequence
from typing import TypeVar

import numpy as np
import numpy.typing as npt

from psmlab.data_ingest.dataset import FrameRef
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result

logger = logging.getLogger(__name__)

T = TypeVar("T")

MIN_SPLIT_FRAMES = 10


def stratified_indices(
    labels: npt.NDArray[np.bool_],
    train_fraction: float,
    seed: int,
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    """Multi-label stratified train/test positions by iterative proportional assignment.

    Labels are processed from the rarest to the most common. Every still unassigned
    frame carrying the current label goes to the side that most lacks positives of
    that label (ties: the side with more free capacity, then at random). Frames with
    no positive label fill the remaining capacity. Side sizes are exact.

    Args:
        labels (np.ndarray): ``n x k`` binary label matrix
        train_fraction (float): Share of frames in the train side
        seed (int): Seed of the tie-breaking and visiting order

    Returns:
        tuple[np.ndarray, np.ndarray]: Sorted train positions and sorted test positions
    """
    rng = np.random.default_rng(seed)
    n = labels.shape[0]
    n_test = round(n * (1.0 - train_fraction))
    capacity = np.array([n - n_test, n_test], dtype=np.int64)
    fractions = capacity / n
    desired = np.outer(fractions, labels.sum(axis=0).astype(np.float64))  # side x label
    side = np.full(n, -1, dtype=np.int64)

    remaining = labels.copy()
    while True:
        counts = remaining[side < 0].sum(axis=0)
        present = np.flatnonzero(counts > 0)
        if present.size == 0:
            break
        label = int(present[np.argmin(counts[present])])
        members = np.flatnonzero((side < 0) & remaining[:, label])
        for i in rng.permutation(members):
            open_sides = np.flatnonzero(capacity > 0)
            need = desired[open_sides, label]
            best = open_sides[need == need.max()]
            if best.size > 1:
                cap = capacity[best]
                best = best[cap == cap.max()]
            chosen = int(best[0] if best.size == 1 else rng.choice(best))
            side[i] = chosen
            capacity[chosen] -= 1
            desired[chosen] -= labels[i]
        remaining[:, label] = False

    leftover = rng.permutation(np.flatnonzero(side < 0))
    n_train_left = int(capacity[0])
    side[leftover[:n_train_left]] = 0
    side[leftover[n_train_left:]] = 1
    return np.flatnonzero(side == 0), np.flatnonzero(side == 1)


def stratified_split(
    frames: Sequence[FrameRef],
    train_fraction: float = 0.8,
    seed: int = 0,
) -> Result[tuple[list[FrameRef], list[FrameRef]], PsmError]:
    """Split one subject's frames into train and test while preserving each AU's positive rate.

    Args:
        frames (Sequence[FrameRef]): Frames of a single subject
        train_fraction (float): Share of frames used for training
        seed (int): Split seed

    Returns:
        Result[tuple[list[FrameRef], list[FrameRef]], PsmError]: ``(train, test)`` in video
        order, or ``TooFewFrames`` below ten frames
    """
    if len(frames) < MIN_SPLIT_FRAMES:
        return fail(ErrorKind.TOO_FEW_FRAMES, f"need at least {MIN_SPLIT_FRAMES} frames to split", count=len(frames))
    if not 0.0 < train_fraction < 1.0:
        return fail(ErrorKind.INVALID_PARAMS, "train_fraction must lie in (0, 1)", train_fraction=train_fraction)
    labels = np.array([f.labels.binary for f in frames], dtype=bool)
    train, test = stratified_indices(labels, train_fraction, seed)
    return Ok(([frames[i] for i in train], [frames[i] for i in test]))


def identity_folds(identities: Sequence[T], k: int = 3, seed: int = 0) -> Result[list[list[T]], PsmError]:
    """Partition identities into ``k`` folds whose sizes differ by at most one.

    The result depends only on the set of identities, not on their input order.

    Example:
        >>> [len(f) for f in identity_folds([f"SN{i:03d}" for i in range(27)], k=3).unwrap()]
        [9, 9, 9]
    """
    if k < 1:
        return fail(ErrorKind.INVALID_PARAMS, "k must be >= 1", k=k)
    unique = sorted(set(identities))  # type: ignore[type-var]
    if len(unique) < k:
        message = f"need at least {k} identities, got {len(unique)}"
        return fail(ErrorKind.TOO_FEW_IDENTITIES, message, count=len(unique))
    order = np.random.default_rng(seed).permutation(len(unique))
    folds: list[list[T]] = [[] for _ in range(k)]
    for position, idx in enumerate(order):
        folds[position % k].append(unique[idx])
    return Ok([sorted(fold) for fold in folds])  # type: ignore[type-var]
