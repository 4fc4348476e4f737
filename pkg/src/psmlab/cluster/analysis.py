"""Per-person PSM-vs-GM cluster analysis and its summary across persons."""

import dataclasses
import logging
from collections.abc import Mapping, Sequence
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy import stats

from psmlab.cluster.dbscan import Labels, SweepResult, cluster_sweep, dbscan
from psmlab.cluster.novelty import ClusterProfile, NoveltyAnalysis, cluster_au_frequencies, novelty_flags
from psmlab.cluster.projection import principal_components, project_2d
from psmlab.config import ClusterConfig
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result, question, result

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class ModelClusters:
    """Sweep, reference clustering and profiles of one model's embeddings."""

    sweep: SweepResult
    reference: tuple[float, int]
    labels: Labels
    profiles: list[ClusterProfile]
    projection: npt.NDArray[np.float64]

    def to_dict(self) -> dict[str, Any]:
        return {
            "sweep": self.sweep.to_dict(),
            "reference": {"eps": self.reference[0], "min_samples": self.reference[1]},
            "labels": self.labels.tolist(),
            "profiles": [p.to_dict() for p in self.profiles],
            "projection": self.projection.tolist(),
        }


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class PersonClusterAnalysis:
    """PSM and GM clusterings of one person's frames.

    ``difference`` is the GM sweep average minus the PSM sweep average, so a negative value
    means the person-specific model found more clusters. ``novelty`` is ``None`` when either
    model found no cluster at its reference setting.
    """

    psm: ModelClusters
    gm: ModelClusters
    difference: float
    novelty: NoveltyAnalysis | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "psm": self.psm.to_dict(),
            "gm": self.gm.to_dict(),
            "difference": self.difference,
            "novelty": self.novelty.to_dict() if self.novelty else None,
        }


def _space(embeddings: npt.ArrayLike, config: ClusterConfig) -> Result[npt.NDArray[np.float64], PsmError]:
    if config.space == "pca":
        return principal_components(embeddings, config.pca_components)
    return Ok(np.asarray(embeddings, dtype=np.float64))


@result
def _model_clusters(
    embeddings: npt.ArrayLike,
    au_labels: npt.NDArray[np.bool_],
    source: str,
    config: ClusterConfig,
    keys: Sequence[str] | None,
) -> Result[ModelClusters, PsmError]:
    points = question(_space(embeddings, config))
    sweep = question(cluster_sweep(points, config.eps_values, config.min_samples_values))
    if config.profile_eps is not None and config.profile_min_samples is not None:
        reference = (float(config.profile_eps), int(config.profile_min_samples))
    else:
        reference = sweep.closest_to_average()
    labels = question(dbscan(points, *reference))
    profiles = question(cluster_au_frequencies(labels, au_labels, source, keys))
    message = "%s: %.2f clusters on average, %d at eps=%g min_samples=%d"
    logger.info(message, source, sweep.average, len(profiles), *reference)
    return Ok(ModelClusters(sweep, reference, labels, profiles, question(project_2d(embeddings))))


@result
def analyze_person(
    psm_embeddings: npt.ArrayLike,
    gm_embeddings: npt.ArrayLike,
    au_labels: npt.ArrayLike,
    config: ClusterConfig | None = None,
    keys: Sequence[str] | None = None,
) -> Result[PersonClusterAnalysis, PsmError]:
    """Sweep, profile and compare the clusterings of one person's frames under both models.

    Args:
        psm_embeddings (array-like): ``N x D`` embeddings from the person-specific model
        gm_embeddings (array-like): ``N x D'`` embeddings of the same frames from the general model
        au_labels (array-like): ``N x 12`` binary AU labels of the frames
        config (ClusterConfig | None): Grid, reference setting, space, distance and threshold
        keys (Sequence[str] | None): Frame keys recorded in the profiles

    Returns:
        Result[PersonClusterAnalysis, PsmError]: Both clusterings, their difference and the novelty verdicts
    """
    config = config or ClusterConfig()
    labels = np.asarray(au_labels, dtype=bool)
    if len(np.asarray(psm_embeddings)) != len(labels) or len(np.asarray(gm_embeddings)) != len(labels):
        return fail(ErrorKind.LENGTH_MISMATCH, "PSM and GM embeddings must cover the same frames as the labels")
    psm = question(_model_clusters(psm_embeddings, labels, "psm", config, keys))
    gm = question(_model_clusters(gm_embeddings, labels, "gm", config, keys))
    novelty = novelty_flags(psm.profiles, gm.profiles, config.threshold, config.distance)
    if novelty.is_err():
        logger.warning("novelty skipped: %s", novelty.unwrap_err())
    return Ok(
        PersonClusterAnalysis(
            psm,
            gm,
            gm.sweep.average - psm.sweep.average,
            next(novelty.iter(), None),
        ),
    )


@dataclasses.dataclass(frozen=True, slots=True)
class ClusterDifferenceSummary:
    """One-sample t-test of per-person GM - PSM cluster-count differences against 0."""

    differences: dict[str, float]
    mean: float
    std: float
    statistic: float
    p_value: float

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def summarize_cluster_differences(differences: Mapping[str, float]) -> Result[ClusterDifferenceSummary, PsmError]:
    values = np.array(list(differences.values()), dtype=np.float64)
    if len(values) < 2:  # noqa: PLR2004
        return fail(ErrorKind.TOO_FEW_SAMPLES, "need differences of at least 2 persons", count=len(values))
    test = stats.ttest_1samp(values, 0.0)
    return Ok(
        ClusterDifferenceSummary(
            dict(differences),
            float(values.mean()),
            float(values.std(ddof=1)),
            float(test.statistic),
            float(test.pvalue),
        ),
    )
