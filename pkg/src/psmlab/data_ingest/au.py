"""The twelve DISFA action units and their binarization."""

import dataclasses
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

AU_NUMBERS: tuple[int, ...] = (1, 2, 4, 5, 6, 9, 12, 15, 17, 20, 25, 26)
AU_NAMES: dict[int, str] = {
    1: "inner brow raiser",
    2: "outer brow raiser",
    4: "brow lowerer",
    5: "upper lid raiser",
    6: "cheek raiser",
    9: "nose wrinkler",
    12: "lip corner puller",
    15: "lip corner depressor",
    17: "chin raiser",
    20: "lip stretcher",
    25: "lips part",
    26: "jaw drop",
}
N_AUS = len(AU_NUMBERS)
MAX_INTENSITY = 5
# intensities strictly above this count as an active AU
POSITIVE_ABOVE = 1


def au_label(au: int) -> str:
    return f"AU{au}"


def au_position(au: int) -> int:
    """Column of an AU number in every 12-wide array."""
    return AU_NUMBERS.index(au)


def binarize(intensities: npt.ArrayLike) -> npt.NDArray[np.bool_]:
    """Active/inactive labels from 0-5 intensities (any shape)."""
    return np.asarray(intensities) > POSITIVE_ABOVE


@dataclasses.dataclass(frozen=True, slots=True)
class AURecord:
    """Intensities of the twelve AUs for one frame, ordered as ``AU_NUMBERS``."""

    intensities: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.intensities) != N_AUS:
            msg = f"AURecord needs {N_AUS} intensities, got {len(self.intensities)}"
            raise ValueError(msg)
        if any(not 0 <= v <= MAX_INTENSITY for v in self.intensities):
            msg = f"AU intensities must lie in [0, {MAX_INTENSITY}]: {self.intensities}"
            raise ValueError(msg)

    @classmethod
    def of(cls, values: Sequence[int] | npt.NDArray[np.integer]) -> "AURecord":
        return cls(tuple(int(v) for v in values))

    @property
    def binary(self) -> tuple[bool, ...]:
        return tuple(v > POSITIVE_ABOVE for v in self.intensities)
