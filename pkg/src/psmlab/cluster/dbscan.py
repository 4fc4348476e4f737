"""DBSCAN and the eps/min_samples sweep."""

import dataclasses
import itertools
import logging
from collections.abc import Sequence
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result, question, result

logger = logging.getLogger(__name__)

NOISE = -1
EPS_VALUES: tuple[float, ...] = (3, 4, 5, 6, 7, 8, 9, 10)
MIN_SAMPLES_VALUES: tuple[int, ...] = (4, 5, 6, 7, 8)
_CHUNK = 512

Labels = npt.NDArray[np.int64]


def neighbor_graph(points: npt.NDArray[np.floating], eps: float) -> sparse.csr_matrix:
    """Adjacency (0/1) of euclidean distance ``<= eps``; every point neighbors itself."""
    x = np.asarray(points, dtype=np.float64)
    rows: list[npt.NDArray[np.int64]] = []
    cols: list[npt.NDArray[np.int64]] = []
    for start in range(0, len(x), _CHUNK):
        r, c = np.nonzero(cdist(x[start : start + _CHUNK], x) <= eps)
        rows.append(r + start)
        cols.append(c)
    r_all = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    c_all = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    return sparse.csr_matrix((np.ones(len(r_all), dtype=np.int32), (r_all, c_all)), shape=(len(x), len(x)))


def label_graph(graph: sparse.csr_matrix, min_samples: int) -> Labels:
    """DBSCAN labels from a neighbor graph.

    Clusters are numbered in the order of their lowest-index core point. A border point
    joins the lowest-numbered cluster among its core neighbors.
    """
    n = graph.shape[0]
    core = np.asarray(graph.sum(axis=1)).ravel() >= min_samples
    labels = np.full(n, NOISE, dtype=np.int64)
    core_idx = np.flatnonzero(core)
    if core_idx.size == 0:
        return labels
    _, component = connected_components(graph[core_idx][:, core_idx], directed=False)
    ids: dict[int, int] = {}
    for point, comp in zip(core_idx, component, strict=True):
        labels[point] = ids.setdefault(int(comp), len(ids))
    for point in np.flatnonzero(~core):
        neighbors = graph.indices[graph.indptr[point] : graph.indptr[point + 1]]
        claimed = labels[neighbors[core[neighbors]]]
        if claimed.size:
            labels[point] = int(claimed.min())
    return labels


def _check(points: npt.NDArray[np.floating], eps: float, min_samples: int) -> Result[None, PsmError]:
    if eps <= 0 or min_samples < 1:
        message = "DBSCAN needs eps > 0 and min_samples >= 1"
        return fail(ErrorKind.INVALID_PARAMS, message, eps=eps, min_samples=min_samples)
    if points.ndim != 2 or not np.isfinite(points).all():  # noqa: PLR2004
        return fail(ErrorKind.INVALID_PARAMS, f"DBSCAN needs a finite 2-D point array, got shape {points.shape}")
    return Ok(None)


@result
def dbscan(points: npt.ArrayLike, eps: float, min_samples: int) -> Result[Labels, PsmError]:
    """Cluster points with euclidean DBSCAN; noise is labelled ``-1``.

    Args:
        points (array-like): ``N x D`` finite coordinates
        eps (float): Neighborhood radius, inclusive
        min_samples (int): Neighbors (the point included) that make a core point

    Returns:
        Result[np.ndarray, PsmError]: Cluster id per point, or ``InvalidParams``
    """
    x = np.asarray(points, dtype=np.float64)
    question(_check(x, eps, min_samples))
    return Ok(label_graph(neighbor_graph(x, eps), min_samples))


def cluster_count(labels: Labels) -> int:
    return len(set(labels.tolist()) - {NOISE})


@dataclasses.dataclass(frozen=True, slots=True)
class SweepResult:
    """Cluster count (noise excluded) of every grid setting."""

    counts: dict[tuple[float, int], int]

    @property
    def average(self) -> float:
        return float(np.mean(list(self.counts.values())))

    def closest_to_average(self) -> tuple[float, int]:
        """Grid setting whose count is nearest the average; ties go to the earliest setting."""
        average = self.average
        return min(self.counts, key=lambda setting: abs(self.counts[setting] - average))

    def to_dict(self) -> dict[str, Any]:
        return {
            "average": self.average,
            "runs": [{"eps": eps, "min_samples": ms, "clusters": c} for (eps, ms), c in self.counts.items()],
        }


@result
def cluster_sweep(
    embeddings: npt.ArrayLike,
    eps_values: Sequence[float] = EPS_VALUES,
    min_samples_values: Sequence[int] = MIN_SAMPLES_VALUES,
) -> Result[SweepResult, PsmError]:
    """Run DBSCAN over the full eps x min_samples grid.

    Example:
        >>> len(cluster_sweep(np.zeros((10, 2))).unwrap().counts)
        40
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if not eps_values or not min_samples_values:
        return fail(ErrorKind.INVALID_PARAMS, "empty sweep grid")
    if len(x) < max(min_samples_values):
        return fail(ErrorKind.TOO_FEW_POINTS, f"sweep needs at least {max(min_samples_values)} points", count=len(x))
    for eps, ms in itertools.product(eps_values, min_samples_values):
        question(_check(x, eps, ms))
    counts: dict[tuple[float, int], int] = {}
    for eps in eps_values:
        graph = neighbor_graph(x, eps)
        for ms in min_samples_values:
            counts[(float(eps), int(ms))] = cluster_count(label_graph(graph, ms))
    sweep = SweepResult(counts)
    logger.debug("sweep over %d settings: average %.2f clusters", len(counts), sweep.average)
    return Ok(sweep)
