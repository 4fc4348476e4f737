"""Person-dependent and person-independent probe protocols."""

import dataclasses
import logging
from collections.abc import Mapping
from typing import Any

import numpy as np
import numpy.typing as npt
import pandas as pd

from psmlab.config import ProbeConfig
from psmlab.cycle import ModelBundle, encode_batch
from psmlab.data_ingest.au import AU_NAMES, AU_NUMBERS, au_label, au_position
from psmlab.data_ingest.splits import MIN_SPLIT_FRAMES, identity_folds, stratified_indices
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.face_align import AlignedCorpus, AlignedSequence
from psmlab.outcome import Ok, Result, question, result
from psmlab.probe.embeddings import EmbeddingTable
from psmlab.probe.linear import ProbeModel, fit_probe
from psmlab.probe.metrics import bootstrap_f1, compare_distributions, compare_models, f1_score

logger = logging.getLogger(__name__)

EmbeddingSource = ModelBundle | EmbeddingTable
# p-values below this get a star in comparison tables
SIGNIFICANCE_LEVEL = 1e-4


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class ProbeResult:
    """Outcome of one probe protocol run.

    Attributes:
        per_au_f1 (dict[int, float]): Test F1 per evaluated AU (fold average for person-independent runs)
        bootstrap_distributions (dict[int, np.ndarray]): ``n_bootstrap`` F1 values per evaluated AU
        ci (dict[int, tuple[float, float]]): 95% percentile interval of each distribution
        evaluated_aus (tuple[int, ...]): AUs with a score, in AU order
        skipped (dict[int, str]): AUs left out and why
        split_descriptor (dict[str, Any]): How frames were split
    """

    per_au_f1: dict[int, float]
    bootstrap_distributions: dict[int, npt.NDArray[np.float64]]
    ci: dict[int, tuple[float, float]]
    evaluated_aus: tuple[int, ...]
    skipped: dict[int, str]
    split_descriptor: dict[str, Any]

    @property
    def mean_f1(self) -> float:
        if not self.evaluated_aus:
            return float("nan")
        return float(np.mean([self.per_au_f1[au] for au in self.evaluated_aus]))

    def replicate_means(self) -> npt.NDArray[np.float64]:
        """Mean over evaluated AUs of each bootstrap replicate."""
        return np.stack([self.bootstrap_distributions[au] for au in self.evaluated_aus]).mean(axis=0)

    def table(self) -> pd.DataFrame:
        rows = [
            {
                "au": au_label(au),
                "name": AU_NAMES[au],
                "f1": self.per_au_f1[au],
                "bootstrap_mean": float(self.bootstrap_distributions[au].mean()),
                "ci_low": self.ci[au][0],
                "ci_high": self.ci[au][1],
            }
            for au in self.evaluated_aus
        ]
        return pd.DataFrame(rows, columns=["au", "name", "f1", "bootstrap_mean", "ci_low", "ci_high"])

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean_f1": self.mean_f1,
            "per_au_f1": {au_label(au): self.per_au_f1[au] for au in self.evaluated_aus},
            "ci": {au_label(au): list(self.ci[au]) for au in self.evaluated_aus},
            "bootstrap": {au_label(au): self.bootstrap_distributions[au].tolist() for au in self.evaluated_aus},
            "evaluated_aus": list(self.evaluated_aus),
            "skipped": {au_label(au): why for au, why in sorted(self.skipped.items())},
            "split": self.split_descriptor,
        }


def sequence_embeddings(
    source: EmbeddingSource,
    sequence: AlignedSequence,
) -> Result[npt.NDArray[np.float32], PsmError]:
    """Embeddings of every row of ``sequence`` from a frozen bundle or an embedding table."""
    if isinstance(source, EmbeddingTable):
        return source.rows_for(sequence.identity, sequence.indices)
    return encode_batch(source, sequence.pixels)


@result
def _score(
    model: ProbeModel,
    embeddings: npt.NDArray[np.float32],
    labels: npt.NDArray[np.bool_],
    config: ProbeConfig,
) -> Result[dict[int, tuple[float, npt.NDArray[np.float64]]], PsmError]:
    """Test F1 and bootstrap distribution per fitted AU; ``labels`` is 12 columns wide."""
    predictions = model.predict(embeddings, config.threshold)
    scores: dict[int, tuple[float, npt.NDArray[np.float64]]] = {}
    for column, au in enumerate(model.aus):
        truth = labels[:, au_position(au)]
        f1 = question(f1_score(predictions[:, column], truth))
        boot = question(bootstrap_f1(predictions[:, column], truth, config.n_bootstrap, config.seed))
        scores[au] = (f1, boot.values)
    return Ok(scores)


def _ci(values: npt.NDArray[np.float64]) -> tuple[float, float]:
    low, high = np.percentile(values, [2.5, 97.5])
    return float(low), float(high)


@result
def eval_person_dependent(
    source: EmbeddingSource,
    corpus: AlignedCorpus,
    identity: str,
    config: ProbeConfig | None = None,
) -> Result[ProbeResult, PsmError]:
    """Probe one person's frames with a stratified train/test split.

    AUs active in no more than ``min_activity`` of the person's whole video are not
    evaluated. The split is stratified on the remaining AUs.

    Args:
        source (EmbeddingSource): Frozen bundle or precomputed embeddings
        corpus (AlignedCorpus): Aligned frames with labels
        identity (str): Person to evaluate
        config (ProbeConfig | None): Protocol settings

    Returns:
        Result[ProbeResult, PsmError]: Scores on the held-out frames, or ``UnknownIdentity``,
        ``TooFewFrames`` or ``DegenerateLabels`` when no AU passes the activity filter
    """
    config = config or ProbeConfig()
    sequence = question(corpus.sequence(identity))
    if len(sequence) < MIN_SPLIT_FRAMES:
        return fail(ErrorKind.TOO_FEW_FRAMES, f"{identity} has {len(sequence)} aligned frames", count=len(sequence))
    labels = sequence.labels
    candidates = config.aus or AU_NUMBERS
    activity = {au: float(labels[:, au_position(au)].mean()) for au in candidates}
    active = tuple(au for au in candidates if activity[au] > config.min_activity)
    skipped = {au: f"active in {activity[au]:.1%} of frames" for au in candidates if au not in active}
    if not active:
        message = f"no AU of {identity} is active in more than {config.min_activity:.0%}"
        return fail(ErrorKind.DEGENERATE_LABELS, message)

    columns = [au_position(au) for au in active]
    train, test = stratified_indices(labels[:, columns], config.train_fraction, config.seed)
    embeddings = question(sequence_embeddings(source, sequence))
    model = question(fit_probe(embeddings[train], labels[train][:, columns], config, aus=active))
    skipped |= model.skipped
    scores = question(_score(model, embeddings[test], labels[test], config))
    mean_f1 = np.mean([s[0] for s in scores.values()])
    logger.info("%s person-dependent: %d AUs, mean F1 %.3f", identity, len(scores), mean_f1)
    return Ok(
        ProbeResult(
            per_au_f1={au: f1 for au, (f1, _) in scores.items()},
            bootstrap_distributions={au: values for au, (_, values) in scores.items()},
            ci={au: _ci(values) for au, (_, values) in scores.items()},
            evaluated_aus=tuple(scores),
            skipped=skipped,
            split_descriptor={
                "protocol": "person_dependent",
                "identity": identity,
                "train_frames": len(train),
                "test_frames": len(test),
                "train_fraction": config.train_fraction,
                "seed": config.seed,
            },
        ),
    )


@result
def eval_person_independent(
    source: EmbeddingSource,
    corpus: AlignedCorpus,
    k: int = 3,
    config: ProbeConfig | None = None,
) -> Result[ProbeResult, PsmError]:
    """K-fold cross-validation over identities.

    Every fold's probe is fitted on the other folds' identities and tested on its own.
    Per-AU F1 and bootstrap distributions are averaged over the folds that scored the AU.

    Args:
        source (EmbeddingSource): Frozen bundle or precomputed embeddings
        corpus (AlignedCorpus): Aligned frames with labels
        k (int): Number of identity folds
        config (ProbeConfig | None): Protocol settings; ``seed`` also shuffles the folds

    Returns:
        Result[ProbeResult, PsmError]: Fold-averaged scores, or ``TooFewIdentities``
    """
    config = config or ProbeConfig()
    if k < 2:  # noqa: PLR2004
        return fail(ErrorKind.INVALID_PARAMS, "person-independent evaluation needs k >= 2", k=k)
    folds = question(identity_folds(corpus.identities, k, config.seed))
    aus = config.aus or AU_NUMBERS
    columns = [au_position(au) for au in aus]
    cache = {i: question(sequence_embeddings(source, corpus.sequences[i])) for i in corpus.identities}

    per_fold: list[dict[int, tuple[float, npt.NDArray[np.float64]]]] = []
    skipped: dict[int, str] = {}
    for test_ids in folds:
        train_ids = [i for i in corpus.identities if i not in test_ids]
        assert not set(train_ids) & set(test_ids), f"identity leakage between folds: {set(train_ids) & set(test_ids)}"
        train_x = np.concatenate([cache[i] for i in train_ids])
        train_y = np.concatenate([corpus.sequences[i].labels for i in train_ids])
        test_x = np.concatenate([cache[i] for i in test_ids])
        test_y = np.concatenate([corpus.sequences[i].labels for i in test_ids])
        model = question(fit_probe(train_x, train_y[:, columns], config, aus=aus))
        for au, why in model.skipped.items():
            skipped.setdefault(au, f"{why} (fold {test_ids})")
        per_fold.append(question(_score(model, test_x, test_y, config)))

    evaluated = tuple(au for au in aus if any(au in fold for fold in per_fold))
    per_au_f1 = {au: float(np.mean([fold[au][0] for fold in per_fold if au in fold])) for au in evaluated}
    distributions = {au: np.mean([fold[au][1] for fold in per_fold if au in fold], axis=0) for au in evaluated}
    for au in evaluated:
        skipped.pop(au, None)
    mean_f1 = np.mean(list(per_au_f1.values()))
    logger.info("person-independent %d-fold: %d AUs, mean F1 %.3f", k, len(evaluated), mean_f1)
    return Ok(
        ProbeResult(
            per_au_f1=per_au_f1,
            bootstrap_distributions=distributions,
            ci={au: _ci(values) for au, values in distributions.items()},
            evaluated_aus=evaluated,
            skipped=skipped,
            split_descriptor={
                "protocol": "person_independent",
                "k": k,
                "seed": config.seed,
                "folds": [
                    {"test": list(test_ids), "train": [i for i in corpus.identities if i not in test_ids]}
                    for test_ids in folds
                ],
            },
        ),
    )


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class SourceComparison:
    """Person-independent results of several embedding sources on identical folds."""

    results: dict[str, ProbeResult]
    best: str
    p_values: dict[str, float]

    def significant(self, name: str) -> bool:
        return self.p_values.get(name, 1.0) < SIGNIFICANCE_LEVEL

    def table(self) -> pd.DataFrame:
        rows = [
            {
                "source": name,
                "mean_f1": res.mean_f1,
                "p_vs_best": self.p_values.get(name, float("nan")),
                "significant": self.significant(name),
            }
            for name, res in self.results.items()
        ]
        return pd.DataFrame(rows, columns=["source", "mean_f1", "p_vs_best", "significant"])

    def to_dict(self) -> dict[str, Any]:
        return {
            "best": self.best,
            "sources": {
                name: res.to_dict() | {"p_vs_best": self.p_values.get(name), "significant": self.significant(name)}
                for name, res in self.results.items()
            },
        }


@result
def compare_embedding_sources(
    sources: Mapping[str, EmbeddingSource],
    corpus: AlignedCorpus,
    k: int = 3,
    config: ProbeConfig | None = None,
) -> Result[SourceComparison, PsmError]:
    """Run the person-independent protocol for each source and test each against the best.

    The best source has the highest mean F1. The others get a Welch p-value computed on
    the per-replicate means of their bootstrap distributions.
    """
    if not sources:
        return fail(ErrorKind.INVALID_PARAMS, "no embedding sources to compare")
    config = config or ProbeConfig()
    results = {name: question(eval_person_independent(src, corpus, k, config)) for name, src in sources.items()}
    best = max(results, key=lambda name: results[name].mean_f1)
    reference = results[best].replicate_means()
    p_values = {
        name: question(compare_models(res.replicate_means(), reference))
        for name, res in results.items()
        if name != best
    }
    return Ok(SourceComparison(results, best, p_values))


def compare_per_au(result_a: ProbeResult, result_b: ProbeResult) -> Result[dict[int, float], PsmError]:
    """Welch p-value for every AU both results evaluated."""
    return compare_distributions(result_a.bootstrap_distributions, result_b.bootstrap_distributions)
