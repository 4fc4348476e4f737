"""Learning curves and the transfer study built from the training regimes."""

import dataclasses
import itertools
import logging
from collections.abc import Sequence
from typing import Any

import numpy as np
import numpy.typing as npt

from psmlab.config import ModelConfig, ProbeConfig, RegimeConfig, TrainConfig
from psmlab.cycle import ModelBundle
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.face_align import AlignedCorpus
from psmlab.outcome import Ok, Result, question, result
from psmlab.probe import compare_models, eval_person_dependent
from psmlab.regimes.regimes import psm_trainer, scratch_short, subsample_frames, train_gm, train_psm, transfer
from psmlab.report.quality import neutral_consistency

logger = logging.getLogger(__name__)

APPROACHES = ("psm", "gm_transfer", "psm_transfer", "scratch_short")
# frames per person used for the neutral consistency distance
CONSISTENCY_FRAMES = 100

Curve = list[tuple[int, float]]


@result
def probe_learning_curve(
    corpus: AlignedCorpus,
    identity: str,
    regime: RegimeConfig,
    model: ModelConfig,
    train: TrainConfig | None = None,
    probe: ProbeConfig | None = None,
    eval_every: int = 10,
) -> Result[Curve, PsmError]:
    """Train a person-specific model and probe it every ``eval_every`` epochs.

    Returns:
        Result[list[tuple[int, float]], PsmError]: ``(epochs trained, mean person-dependent F1)``
    """
    if eval_every < 1:
        return fail(ErrorKind.INVALID_PARAMS, "eval_every must be >= 1", eval_every=eval_every)
    trainer = question(psm_trainer(corpus, identity, regime, model, train))
    curve: Curve = []
    while trainer.epoch < regime.epochs:
        question(trainer.run(min(eval_every, regime.epochs - trainer.epoch)))
        f1 = question(eval_person_dependent(trainer.bundle, corpus, identity, probe)).mean_f1
        curve.append((trainer.epoch, f1))
        logger.info("%s epoch %d: probe mean F1 %.3f", identity, trainer.epoch, f1)
    return Ok(curve)


def epochs_to_fraction_of_final(curve: Curve, fraction: float = 0.9) -> int:
    """First epoch at which the curve reaches ``fraction`` of its final value.

    Example:
        >>> epochs_to_fraction_of_final([(10, 0.2), (20, 0.7), (30, 0.75)])
        20
    """
    assert curve, "empty learning curve"
    target = fraction * curve[-1][1]
    return next(epoch for epoch, value in curve if value >= target)


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class ApproachOutcome:
    """One approach on one target person (approach 3 is averaged over its sources)."""

    mean_f1: float
    replicate_means: npt.NDArray[np.float64]
    neutral_consistency: float
    sources: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean_f1": self.mean_f1,
            "neutral_consistency": self.neutral_consistency,
            "bootstrap_means": self.replicate_means.tolist(),
            "sources": list(self.sources),
        }


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class TransferStudy:
    outcomes: dict[str, dict[str, ApproachOutcome]]
    p_values: dict[str, dict[str, float]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "approaches": list(APPROACHES),
            "targets": {
                target: {
                    "approaches": {name: o.to_dict() for name, o in by_approach.items()},
                    "p_values": self.p_values[target],
                }
                for target, by_approach in self.outcomes.items()
            },
        }


@result
def _outcome(
    bundles: Sequence[ModelBundle],
    corpus: AlignedCorpus,
    target: str,
    probe: ProbeConfig,
    sources: tuple[str, ...] = (),
) -> Result[ApproachOutcome, PsmError]:
    sequence = corpus.sequences[target]
    frames = sequence.pixels[subsample_frames(len(sequence), min(1.0, CONSISTENCY_FRAMES / max(1, len(sequence))))]
    results = [question(eval_person_dependent(b, corpus, target, probe)) for b in bundles]
    distances = [question(neutral_consistency(b, frames)) for b in bundles]
    return Ok(
        ApproachOutcome(
            mean_f1=float(np.mean([r.mean_f1 for r in results])),
            replicate_means=np.mean([r.replicate_means() for r in results], axis=0),
            neutral_consistency=float(np.mean(distances)),
            sources=sources,
        ),
    )


@result
def run_transfer_study(
    corpus: AlignedCorpus,
    model: ModelConfig,
    full: RegimeConfig,
    short: RegimeConfig,
    train: TrainConfig | None = None,
    probe: ProbeConfig | None = None,
    targets: Sequence[str] | None = None,
) -> Result[TransferStudy, PsmError]:
    """Compare the four ways of obtaining a model for a target person.

    1. ``psm``: person-specific, ``full`` regime on all the target's frames.
    2. ``gm_transfer``: a general model of the other persons, fine-tuned with ``short``.
    3. ``psm_transfer``: every other person's PSM fine-tuned with ``short``, averaged.
    4. ``scratch_short``: a fresh model trained with ``short`` only.

    Args:
        corpus (AlignedCorpus): At least two persons
        model (ModelConfig): Architecture of every model
        full (RegimeConfig): Regime of the full-length runs (psm and pretraining)
        short (RegimeConfig): Regime of fine-tuning and the scratch baseline
        train (TrainConfig | None): Optimizer settings
        probe (ProbeConfig | None): Person-dependent protocol settings
        targets (Sequence[str] | None): Persons to evaluate; all by default

    Returns:
        Result[TransferStudy, PsmError]: Per target and approach, F1 and neutral consistency,
        with Welch p-values between approaches
    """
    probe = probe or ProbeConfig()
    if len(corpus.identities) < 2:  # noqa: PLR2004
        return fail(ErrorKind.TOO_FEW_IDENTITIES, "the transfer study needs at least 2 persons")
    targets = list(targets or corpus.identities)
    psm_regime = dataclasses.replace(full, regime="psm")
    psms = {i: question(train_psm(corpus, i, psm_regime, model, train)) for i in corpus.identities}

    outcomes: dict[str, dict[str, ApproachOutcome]] = {}
    p_values: dict[str, dict[str, float]] = {}
    for target in targets:
        question(corpus.sequence(target))
        others = [i for i in corpus.identities if i != target]
        logger.info("transfer study: target %s, sources %s", target, ", ".join(others))
        gm = question(train_gm(question(corpus.subset(others)), dataclasses.replace(full, regime="gm"), model, train))
        from_gm = question(transfer(gm, corpus, target, dataclasses.replace(short, regime="transfer_from_gm"), train))
        from_psm = [
            question(transfer(psms[s], corpus, target, dataclasses.replace(short, regime="transfer_from_psm"), train))
            for s in others
        ]
        scratch = question(scratch_short(corpus, target, short, model, train))
        outcomes[target] = {
            "psm": question(_outcome([psms[target]], corpus, target, probe)),
            "gm_transfer": question(_outcome([from_gm], corpus, target, probe)),
            "psm_transfer": question(_outcome(from_psm, corpus, target, probe, tuple(others))),
            "scratch_short": question(_outcome([scratch], corpus, target, probe)),
        }
        p_values[target] = {
            f"{a}|{b}": question(
                compare_models(outcomes[target][a].replicate_means, outcomes[target][b].replicate_means),
            )
            for a, b in itertools.combinations(APPROACHES, 2)
        }
    return Ok(TransferStudy(outcomes, p_values))
