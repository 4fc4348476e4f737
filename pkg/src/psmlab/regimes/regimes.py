"""Training regimes: person-specific, general, transfer and short scratch runs."""

import dataclasses
import logging
import math
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt
import torch

from psmlab.config import ModelConfig, RegimeConfig, TrainConfig
from psmlab.cycle import LossBreakdown, ModelBundle, OptimizerState, PairBatch, Provenance, train_step
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.face_align import AlignedCorpus, AlignedSequence
from psmlab.outcome import Ok, Result, question, result
from psmlab.regimes.curriculum import sample_pairs

logger = logging.getLogger(__name__)

_LOSS_FIELDS = tuple(f.name for f in dataclasses.fields(LossBreakdown))


def subsample_frames(n: int, fraction: float) -> npt.NDArray[np.int64]:
    """Rows kept for ``frame_fraction``: a uniform stride over the whole video.

    Example:
        >>> len(subsample_frames(4860, 0.1))
        486
    """
    if fraction >= 1.0 or n < 2:  # noqa: PLR2004
        return np.arange(n, dtype=np.int64)
    count = min(n, max(2, round(fraction * n)))
    return np.unique(np.round(np.linspace(0, n - 1, count)).astype(np.int64))


@dataclasses.dataclass(slots=True, eq=False)
class Trainer:
    """Training loop over one or more identities' sequences.

    Every batch is drawn from a single identity, chosen with probability proportional to
    its frame count. The symmetric-loss decay counts epochs from the bundle's pretraining,
    the curriculum counts from the start of this trainer.

    Attributes:
        bundle (ModelBundle): Model updated in place
        sequences (tuple[AlignedSequence, ...]): Training frames per identity
        regime (RegimeConfig): Seed and curriculum
        train (TrainConfig): Optimizer and batch settings
        state (OptimizerState): Adam state across calls to ``run``
        rng (np.random.Generator): Pair sampler
        epoch (int): Epochs completed by this trainer
        epoch_offset (int): Epochs the bundle had before this trainer
        history (list[LossBreakdown]): Mean loss terms of every completed epoch
    """

    bundle: ModelBundle
    sequences: tuple[AlignedSequence, ...]
    regime: RegimeConfig
    train: TrainConfig
    state: OptimizerState
    rng: np.random.Generator
    epoch: int = 0
    epoch_offset: int = 0
    history: list[LossBreakdown] = dataclasses.field(default_factory=list)

    @classmethod
    def create(
        cls,
        bundle: ModelBundle,
        sequences: Sequence[AlignedSequence],
        regime: RegimeConfig,
        train: TrainConfig | None = None,
    ) -> "Trainer":
        train = train or TrainConfig()
        assert sequences, "trainer needs at least one sequence"
        return cls(
            bundle=bundle,
            sequences=tuple(sequences),
            regime=regime,
            train=train,
            state=OptimizerState.create(bundle, train),
            rng=np.random.default_rng(regime.seed),
            epoch_offset=bundle.provenance.total_epochs,
        )

    @property
    def frames(self) -> int:
        return sum(len(s) for s in self.sequences)

    @result
    def run_epoch(self) -> Result[LossBreakdown, PsmError]:
        pair_count = self.train.pairs_per_epoch or self.frames
        weights = np.array([len(s) for s in self.sequences], dtype=np.float64)
        weights /= weights.sum()
        losses: list[LossBreakdown] = []
        for _ in range(math.ceil(pair_count / self.train.batch_size)):
            seq = self.sequences[int(self.rng.choice(len(self.sequences), p=weights))]
            sampled = sample_pairs(
                len(seq),
                self.train.batch_size,
                self.epoch,
                self.regime.curriculum,
                self.rng,
                frames=seq.indices,
            )
            i, j = question(sampled)
            batch = PairBatch(seq.pixels[i], seq.pixels[j], (seq.identity,) * len(i))
            _, self.state, breakdown = question(
                train_step(self.bundle, batch, self.state, self.epoch_offset + self.epoch, self.train),
            )
            losses.append(breakdown)
        mean = LossBreakdown(**{k: float(np.mean([getattr(b, k) for b in losses])) for k in _LOSS_FIELDS})
        self.history.append(mean)
        self.epoch += 1
        logger.info(
            "epoch %d: total %.4f reconstruction %.4f cycle %.4f symmetric %.4f (w=%.3f)",
            self.epoch,
            mean.total,
            mean.reconstruction,
            mean.cycle_consistency,
            mean.neutral_symmetric,
            mean.neutral_symmetric_weight,
        )
        return Ok(mean)

    @result
    def run(self, epochs: int) -> Result[list[LossBreakdown], PsmError]:
        """Train ``epochs`` more epochs; returns their mean losses."""
        if self.train.num_threads:
            torch.set_num_threads(self.train.num_threads)
        start = len(self.history)
        for _ in range(epochs):
            question(self.run_epoch())
        return Ok(self.history[start:])


def check_compatible(config: ModelConfig, corpus: AlignedCorpus) -> Result[ModelConfig, PsmError]:
    if config.image_size != corpus.image_size or config.in_channels != corpus.channels:
        return fail(
            ErrorKind.CONFIG_MISMATCH,
            f"model expects {config.image_size}px x {config.in_channels} channels, "
            f"corpus has {corpus.image_size}px x {corpus.channels}",
            model_size=config.image_size,
            corpus_size=corpus.image_size,
        )
    return Ok(config)


def _training_sequence(corpus: AlignedCorpus, identity: str, fraction: float) -> Result[AlignedSequence, PsmError]:
    return corpus.sequence(identity).map(lambda seq: seq.take(subsample_frames(len(seq), fraction)))


def _regime_label(regime: RegimeConfig) -> str:
    if regime.regime == "scratch_short":
        return "scratch"
    if regime.regime == "psm" and regime.curriculum is not None:
        return "curriculum"
    return regime.regime


@result
def psm_trainer(
    corpus: AlignedCorpus,
    identity: str,
    regime: RegimeConfig,
    model: ModelConfig,
    train: TrainConfig | None = None,
) -> Result[Trainer, PsmError]:
    """A trainer for a fresh person-specific bundle, before any epoch."""
    question(regime.validate())
    sequence = question(_training_sequence(corpus, identity, regime.frame_fraction))
    question(check_compatible(model, corpus))
    bundle = question(ModelBundle.create(model, regime.seed))
    return Ok(Trainer.create(bundle, [sequence], regime, train))


@result
def train_psm(
    corpus: AlignedCorpus,
    identity: str,
    regime: RegimeConfig,
    model: ModelConfig,
    train: TrainConfig | None = None,
) -> Result[ModelBundle, PsmError]:
    """Train one model on one person's frames only.

    Args:
        corpus (AlignedCorpus): Aligned frames
        identity (str): Person to train on
        regime (RegimeConfig): Epochs, frame fraction, seed and optional curriculum
        model (ModelConfig): Architecture; must match the corpus image size and channels
        train (TrainConfig | None): Optimizer settings

    Returns:
        Result[ModelBundle, PsmError]: Trained bundle, or ``UnknownIdentity``/``ConfigMismatch``
    """
    trainer = question(psm_trainer(corpus, identity, regime, model, train))
    question(trainer.run(regime.epochs))
    trainer.bundle.provenance = Provenance(
        _regime_label(regime),
        (identity,),
        regime.epochs,
        regime.seed,
        trainer.frames,
    )
    return Ok(trainer.bundle)


@result
def train_gm(
    corpus: AlignedCorpus,
    regime: RegimeConfig,
    model: ModelConfig,
    train: TrainConfig | None = None,
) -> Result[ModelBundle, PsmError]:
    """Train one model on every person; each batch still pairs frames of one person."""
    question(regime.validate())
    if not corpus.identities:
        return fail(ErrorKind.EMPTY_DATASET, "general model needs at least one identity")
    question(check_compatible(model, corpus))
    sequences = [question(_training_sequence(corpus, i, regime.frame_fraction)) for i in corpus.identities]
    bundle = question(ModelBundle.create(model, regime.seed))
    trainer = Trainer.create(bundle, sequences, regime, train)
    question(trainer.run(regime.epochs))
    bundle.provenance = Provenance("gm", corpus.identities, regime.epochs, regime.seed, trainer.frames)
    return Ok(bundle)


@result
def transfer(
    pretrained: ModelBundle,
    corpus: AlignedCorpus,
    new_identity: str,
    regime: RegimeConfig,
    train: TrainConfig | None = None,
) -> Result[ModelBundle, PsmError]:
    """Fine-tune a copy of ``pretrained`` on a new person; every parameter is trained.

    The pretrained bundle is left untouched. With zero epochs the copy keeps its
    parameters exactly.
    """
    question(regime.validate())
    question(check_compatible(pretrained.config, corpus))
    sequence = question(_training_sequence(corpus, new_identity, regime.frame_fraction))
    bundle = pretrained.clone()
    trainer = Trainer.create(bundle, [sequence], regime, train)
    question(trainer.run(regime.epochs))
    bundle.provenance = Provenance(
        "transfer",
        (new_identity,),
        regime.epochs,
        regime.seed,
        trainer.frames,
        parent=pretrained.provenance,
    )
    return Ok(bundle)


def scratch_short(
    corpus: AlignedCorpus,
    identity: str,
    regime: RegimeConfig,
    model: ModelConfig,
    train: TrainConfig | None = None,
) -> Result[ModelBundle, PsmError]:
    """The short from-scratch baseline of the transfer study."""
    return train_psm(corpus, identity, dataclasses.replace(regime, regime="scratch_short"), model, train)


def train_regime(
    corpus: AlignedCorpus,
    regime: RegimeConfig,
    model: ModelConfig,
    train: TrainConfig | None = None,
    *,
    identity: str | None = None,
    pretrained: ModelBundle | None = None,
) -> Result[ModelBundle, PsmError]:
    """Dispatch on ``regime.regime``."""
    if regime.regime == "gm":
        return train_gm(corpus, regime, model, train)
    if identity is None:
        return fail(ErrorKind.INVALID_CONFIG, f"regime {regime.regime} needs an identity")
    if regime.regime == "psm":
        return train_psm(corpus, identity, regime, model, train)
    if regime.regime == "scratch_short":
        return scratch_short(corpus, identity, regime, model, train)
    if pretrained is None:
        return fail(ErrorKind.INVALID_CONFIG, f"regime {regime.regime} needs a pretrained bundle")
    expected = "gm" if regime.regime == "transfer_from_gm" else "psm"
    if pretrained.provenance.regime not in (expected, "curriculum" if expected == "psm" else expected):
        logger.warning("%s starts from a %s bundle", regime.regime, pretrained.provenance.regime)
    return transfer(pretrained, corpus, identity, regime, train)
