from .analysis import (
    ClusterDifferenceSummary,
    ModelClusters,
    PersonClusterAnalysis,
    analyze_person,
    summarize_cluster_differences,
)
from .dbscan import EPS_VALUES, MIN_SAMPLES_VALUES, NOISE, SweepResult, cluster_count, cluster_sweep, dbscan
from .novelty import (
    NOVELTY_THRESHOLD,
    ClusterProfile,
    NoveltyAnalysis,
    NoveltyVerdict,
    cluster_au_frequencies,
    custom_metric_raw,
    normalize_matrix,
    novelty_flags,
)
from .projection import principal_components, project_2d

__all__ = [
    "EPS_VALUES",
    "MIN_SAMPLES_VALUES",
    "NOISE",
    "NOVELTY_THRESHOLD",
    "ClusterDifferenceSummary",
    "ClusterProfile",
    "ModelClusters",
    "NoveltyAnalysis",
    "NoveltyVerdict",
    "PersonClusterAnalysis",
    "SweepResult",
    "analyze_person",
    "cluster_au_frequencies",
    "cluster_count",
    "cluster_sweep",
    "custom_metric_raw",
    "dbscan",
    "normalize_matrix",
    "novelty_flags",
    "principal_components",
    "project_2d",
    "summarize_cluster_differences",
]
