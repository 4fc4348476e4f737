from .curriculum import curriculum_distance, sample_pair, sample_pairs
from .regimes import (
    Trainer,
    check_compatible,
    psm_trainer,
    scratch_short,
    subsample_frames,
    train_gm,
    train_psm,
    train_regime,
    transfer,
)
from .study import (
    APPROACHES,
    ApproachOutcome,
    TransferStudy,
    epochs_to_fraction_of_final,
    probe_learning_curve,
    run_transfer_study,
)

__all__ = [
    "APPROACHES",
    "ApproachOutcome",
    "Trainer",
    "TransferStudy",
    "check_compatible",
    "curriculum_distance",
    "epochs_to_fraction_of_final",
    "probe_learning_curve",
    "psm_trainer",
    "run_transfer_study",
    "sample_pair",
    "sample_pairs",
    "scratch_short",
    "subsample_frames",
    "train_gm",
    "train_psm",
    "train_regime",
    "transfer",
]
