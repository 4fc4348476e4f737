from .embeddings import EMBEDDINGS_FORMAT, EmbeddingTable, cache_key, embed_corpus
from .linear import MIN_PROBE_SAMPLES, ProbeModel, fit_probe
from .metrics import BootstrapF1, bootstrap_f1, compare_distributions, compare_models, f1_score
from .protocol import (
    SIGNIFICANCE_LEVEL,
    EmbeddingSource,
    ProbeResult,
    SourceComparison,
    compare_embedding_sources,
    compare_per_au,
    eval_person_dependent,
    eval_person_independent,
    sequence_embeddings,
)

__all__ = [
    "EMBEDDINGS_FORMAT",
    "MIN_PROBE_SAMPLES",
    "SIGNIFICANCE_LEVEL",
    "BootstrapF1",
    "EmbeddingSource",
    "EmbeddingTable",
    "ProbeModel",
    "ProbeResult",
    "SourceComparison",
    "bootstrap_f1",
    "cache_key",
    "compare_distributions",
    "compare_embedding_sources",
    "compare_models",
    "compare_per_au",
    "embed_corpus",
    "eval_person_dependent",
    "eval_person_independent",
    "f1_score",
    "fit_probe",
    "sequence_embeddings",
]
