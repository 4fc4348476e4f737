"""Cluster AU profiles and the PSM-vs-GM novelty metric."""

import dataclasses
import logging
from collections.abc import Sequence
from typing import Any, Literal

import numpy as np
import numpy.typing as npt

from psmlab.cluster.dbscan import NOISE
from psmlab.data_ingest.au import AU_NUMBERS, au_label
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result

logger = logging.getLogger(__name__)

Distance = Literal["l1", "l2"]
NOVELTY_THRESHOLD = 0.8


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class ClusterProfile:
    """AU frequencies of one cluster.

    Attributes:
        cluster_id (int): Label produced by ``dbscan``
        members (np.ndarray): Row positions of the member frames
        member_keys (tuple[str, ...]): ``identity:index`` of each member, when known
        au_frequency (np.ndarray): Share of members with each of the twelve AUs active
        source (str): ``psm`` or ``gm``
    """

    cluster_id: int
    members: npt.NDArray[np.int64]
    member_keys: tuple[str, ...]
    au_frequency: npt.NDArray[np.float64]
    source: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "cluster_id": self.cluster_id,
            "source": self.source,
            "size": len(self.members),
            "au_frequency": {au_label(au): float(f) for au, f in zip(AU_NUMBERS, self.au_frequency, strict=True)},
            "members": list(self.member_keys) if self.member_keys else self.members.tolist(),
        }


def cluster_au_frequencies(
    labels: npt.ArrayLike,
    au_labels: npt.ArrayLike,
    source: str,
    keys: Sequence[str] | None = None,
) -> Result[list[ClusterProfile], PsmError]:
    """One profile per non-noise cluster, in cluster id order."""
    lab = np.asarray(labels, dtype=np.int64).ravel()
    aus = np.asarray(au_labels, dtype=bool)
    if aus.ndim != 2 or len(lab) != len(aus) or (keys is not None and len(keys) != len(lab)):  # noqa: PLR2004
        return fail(ErrorKind.LENGTH_MISMATCH, f"{len(lab)} cluster labels for {len(aus)} AU records")
    profiles = []
    for cluster_id in sorted(set(lab.tolist()) - {NOISE}):
        members = np.flatnonzero(lab == cluster_id)
        member_keys = tuple(keys[i] for i in members) if keys is not None else ()
        profiles.append(ClusterProfile(cluster_id, members, member_keys, aus[members].mean(axis=0), source))
    return Ok(profiles)


def _metric(a: npt.NDArray[np.float64], b: npt.NDArray[np.float64], distance: Distance) -> tuple[float, bool]:
    """Raw metric and whether a constant vector forced the correlation to 0."""
    constant = bool(np.ptp(a) == 0 or np.ptp(b) == 0)
    rho = 0.0 if constant else float(np.corrcoef(a, b)[0, 1])
    gap = float(np.abs(a - b).sum()) if distance == "l1" else float(np.sqrt(((a - b) ** 2).sum()))
    return rho - gap, constant


def custom_metric_raw(v_a: npt.ArrayLike, v_b: npt.ArrayLike, distance: Distance = "l1") -> float:
    """Pearson correlation minus the distance between two AU frequency vectors.

    A constant vector has no correlation; it counts as 0 and a warning is logged.

    Example:
        >>> custom_metric_raw([1.0, 0.0, 0.5], [1.0, 0.0, 0.5])
        1.0
    """
    a = np.asarray(v_a, dtype=np.float64)
    b = np.asarray(v_b, dtype=np.float64)
    assert a.shape == b.shape, f"frequency vectors differ in shape: {a.shape} vs {b.shape}"
    value, constant = _metric(a, b, distance)
    if constant:
        logger.warning("%s: constant frequency vector, correlation taken as 0", ErrorKind.ZERO_VARIANCE)
    return value


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class NoveltyVerdict:
    """A cluster, its normalized metric against every cluster of the other model, and the verdict."""

    cluster: ClusterProfile
    metric_values: npt.NDArray[np.float64]
    is_novel: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "cluster_id": self.cluster.cluster_id,
            "source": self.cluster.source,
            "metric_values": self.metric_values.tolist(),
            "is_novel": self.is_novel,
        }


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class NoveltyAnalysis:
    """Verdicts for both sides plus the PSM x GM metric matrices."""

    psm: tuple[NoveltyVerdict, ...]
    gm: tuple[NoveltyVerdict, ...]
    raw: npt.NDArray[np.float64]
    normalized: npt.NDArray[np.float64]
    threshold: float
    zero_variance_pairs: int

    @property
    def novel_psm(self) -> tuple[int, ...]:
        return tuple(v.cluster.cluster_id for v in self.psm if v.is_novel)

    @property
    def novel_gm(self) -> tuple[int, ...]:
        return tuple(v.cluster.cluster_id for v in self.gm if v.is_novel)

    def to_dict(self) -> dict[str, Any]:
        return {
            "threshold": self.threshold,
            "raw": self.raw.tolist(),
            "normalized": self.normalized.tolist(),
            "psm": [v.to_dict() for v in self.psm],
            "gm": [v.to_dict() for v in self.gm],
            "novel_psm": list(self.novel_psm),
            "novel_gm": list(self.novel_gm),
            "zero_variance_pairs": self.zero_variance_pairs,
        }


def normalize_matrix(raw: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Min-max scaling to [0, 1]; a constant matrix maps to all ones."""
    low, high = float(raw.min()), float(raw.max())
    if high == low:
        return np.ones_like(raw)
    return (raw - low) / (high - low)


def novelty_flags(
    psm_profiles: Sequence[ClusterProfile],
    gm_profiles: Sequence[ClusterProfile],
    threshold: float = NOVELTY_THRESHOLD,
    distance: Distance = "l1",
) -> Result[NoveltyAnalysis, PsmError]:
    """Flag clusters that resemble no cluster of the other model.

    The raw metric of every PSM x GM pair is min-max normalized over the whole matrix. A PSM
    cluster is novel when its whole row stays below ``threshold``; a GM cluster when its column does.

    Args:
        psm_profiles (Sequence[ClusterProfile]): Clusters of the person-specific model
        gm_profiles (Sequence[ClusterProfile]): Clusters of the general model
        threshold (float): Novelty threshold on the normalized metric
        distance (Distance): ``l1`` or ``l2`` distance term

    Returns:
        Result[NoveltyAnalysis, PsmError]: Verdicts and matrices, or ``EmptySide``
    """
    if not psm_profiles or not gm_profiles:
        return fail(
            ErrorKind.EMPTY_SIDE,
            "novelty needs clusters on both sides",
            psm=len(psm_profiles),
            gm=len(gm_profiles),
        )
    raw = np.empty((len(psm_profiles), len(gm_profiles)))
    zero_variance = 0
    for i, p in enumerate(psm_profiles):
        for j, g in enumerate(gm_profiles):
            raw[i, j], constant = _metric(p.au_frequency, g.au_frequency, distance)
            zero_variance += constant
    if zero_variance:
        message = "%s: %d cluster pairs involve a constant frequency vector"
        logger.warning(message, ErrorKind.ZERO_VARIANCE, zero_variance)
    normalized = normalize_matrix(raw)
    psm = tuple(
        NoveltyVerdict(p, normalized[i], bool(normalized[i].max() < threshold)) for i, p in enumerate(psm_profiles)
    )
    gm = tuple(
        NoveltyVerdict(g, normalized[:, j], bool(normalized[:, j].max() < threshold))
        for j, g in enumerate(gm_profiles)
    )
    return Ok(NoveltyAnalysis(psm, gm, raw, normalized, threshold, zero_variance))
