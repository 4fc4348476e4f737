"""End-to-end directional checks at desk scale; deselected by default (``-m slow`` runs them)."""

import dataclasses

import numpy as np
import pytest

from psmlab.cluster import analyze_person
from psmlab.config import (
    AlignConfig,
    ClusterConfig,
    CurriculumConfig,
    ModelConfig,
    ProbeConfig,
    RegimeConfig,
    SynthConfig,
    TrainConfig,
)
from psmlab.cycle import ModelBundle
from psmlab.data_ingest import synth_generate
from psmlab.face_align import (
    AlignedCorpus,
    FrameLandmarks,
    LandmarkSet,
    align_dataset,
    align_face,
    eye_level_gap,
    transform_points,
)
from psmlab.probe import eval_person_dependent, sequence_embeddings
from psmlab.regimes import (
    epochs_to_fraction_of_final,
    probe_learning_curve,
    psm_trainer,
    scratch_short,
    train_gm,
    train_psm,
    transfer,
)
from psmlab.report import neutral_consistency, noise_check

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)
MODEL = ModelConfig(image_size=32, embedding_dim=32)
TRAIN = TrainConfig(lr=1e-3, batch_size=16, pairs_per_epoch=128)
PROBE = ProbeConfig()


def synthetic_corpus(seed: int) -> AlignedCorpus:
    dataset = synth_generate(SynthConfig(subjects=3, frames_per_subject=300, seed=seed)).unwrap()
    return align_dataset(dataset, FrameLandmarks(), AlignConfig(out_size=32)).unwrap()


@pytest.fixture(scope="module")
def corpora() -> dict[int, AlignedCorpus]:
    return {seed: synthetic_corpus(seed) for seed in SEEDS}


@pytest.fixture(scope="module")
def trained(corpora: dict[int, AlignedCorpus]) -> tuple[ModelBundle, list[float]]:
    """A person-specific model after 50 epochs, with the total loss of every epoch."""
    trainer = psm_trainer(corpora[0], "SN001", RegimeConfig(epochs=50), MODEL, TRAIN).unwrap()
    history = trainer.run(50).unwrap()
    return trainer.bundle, [h.total for h in history]


def test_training_halves_the_loss(trained: tuple[ModelBundle, list[float]]) -> None:
    _, totals = trained
    assert len(totals) == 50
    assert totals[-1] <= 0.5 * totals[0]


def test_trained_encoder_beats_random_encoder(
    trained: tuple[ModelBundle, list[float]],
    corpora: dict[int, AlignedCorpus],
) -> None:
    bundle, _ = trained
    fitted = eval_person_dependent(bundle, corpora[0], "SN001", PROBE).unwrap()
    untrained = ModelBundle.create(MODEL, seed=0).unwrap()
    baseline = eval_person_dependent(untrained, corpora[0], "SN001", PROBE).unwrap()
    assert fitted.mean_f1 >= 0.8
    assert baseline.mean_f1 <= 0.6


def test_noise_inputs_do_not_look_neutral(
    trained: tuple[ModelBundle, list[float]],
    corpora: dict[int, AlignedCorpus],
) -> None:
    bundle, _ = trained
    frames = corpora[0].sequences["SN001"].pixels
    assert noise_check(bundle, 100, frames, seed=0).unwrap().fraction_beyond >= 0.95


def test_person_specific_models_probe_better(corpora: dict[int, AlignedCorpus]) -> None:
    psm_scores, gm_scores = [], []
    for seed, corpus in corpora.items():
        regime = RegimeConfig(epochs=50, seed=seed)
        gm = train_gm(corpus, dataclasses.replace(regime, regime="gm"), MODEL, TRAIN).unwrap()
        for identity in corpus.identities:
            psm = train_psm(corpus, identity, regime, MODEL, TRAIN).unwrap()
            psm_scores.append(eval_person_dependent(psm, corpus, identity, PROBE).unwrap().mean_f1)
            gm_scores.append(eval_person_dependent(gm, corpus, identity, PROBE).unwrap().mean_f1)
    assert np.mean(psm_scores) >= np.mean(gm_scores)


def test_person_specific_models_find_more_clusters(corpora: dict[int, AlignedCorpus]) -> None:
    differences: dict[str, list[float]] = {}
    for seed, corpus in corpora.items():
        regime = RegimeConfig(epochs=50, seed=seed)
        gm = train_gm(corpus, dataclasses.replace(regime, regime="gm"), MODEL, TRAIN).unwrap()
        for identity, sequence in corpus.sequences.items():
            psm = train_psm(corpus, identity, regime, MODEL, TRAIN).unwrap()
            analysis = analyze_person(
                sequence_embeddings(psm, sequence).unwrap(),
                sequence_embeddings(gm, sequence).unwrap(),
                sequence.labels,
                ClusterConfig(),
            ).unwrap()
            differences.setdefault(identity, []).append(analysis.difference)
    assert all(np.mean(d) <= 0.0 for d in differences.values())


def test_transfer_beats_short_scratch_training(corpora: dict[int, AlignedCorpus]) -> None:
    wins = 0
    for seed, corpus in corpora.items():
        long = RegimeConfig(epochs=500, seed=seed)
        short = RegimeConfig(regime="transfer_from_psm", epochs=10, frame_fraction=0.1, seed=seed)
        source = train_psm(corpus, "SN001", long, MODEL, TRAIN).unwrap()
        target = train_psm(corpus, "SN002", long, MODEL, TRAIN).unwrap()
        tuned = transfer(source, corpus, "SN002", short, TRAIN).unwrap()
        scratch = scratch_short(corpus, "SN002", short, MODEL, TRAIN).unwrap()

        tuned_f1 = eval_person_dependent(tuned, corpus, "SN002", PROBE).unwrap().mean_f1
        scratch_f1 = eval_person_dependent(scratch, corpus, "SN002", PROBE).unwrap().mean_f1
        wins += tuned_f1 > scratch_f1

        frames = corpus.sequences["SN002"].pixels[:100]
        full_nc, tuned_nc, scratch_nc = (neutral_consistency(b, frames).unwrap() for b in (target, tuned, scratch))
        assert full_nc < tuned_nc < scratch_nc
    assert wins >= 2


def test_curriculum_reaches_final_score_sooner(corpora: dict[int, AlignedCorpus]) -> None:
    faster = 0
    for seed, corpus in corpora.items():
        uniform = RegimeConfig(epochs=100, seed=seed)
        ramped = dataclasses.replace(uniform, curriculum=CurriculumConfig(d_min=1, d_max=101, ramp_epochs=100))
        plain = probe_learning_curve(corpus, "SN001", uniform, MODEL, TRAIN, PROBE, eval_every=10).unwrap()
        curriculum = probe_learning_curve(corpus, "SN001", ramped, MODEL, TRAIN, PROBE, eval_every=10).unwrap()
        faster += epochs_to_fraction_of_final(curriculum) <= epochs_to_fraction_of_final(plain)
    assert faster >= 2


def test_alignment_levels_eyes_and_is_idempotent() -> None:
    dataset = synth_generate(SynthConfig(subjects=1, frames_per_subject=500, seed=11)).unwrap()
    config = AlignConfig(out_size=32)
    for frame in dataset:
        assert frame.landmarks is not None
        pixels = frame.load_pixels().unwrap()
        landmarks = LandmarkSet.create(frame.landmarks, pixels.shape).unwrap()
        aligned = align_face(pixels, landmarks, 32, config).unwrap()
        assert eye_level_gap(landmarks, aligned.transform) <= 1.0

        moved = np.clip(transform_points(landmarks.points, aligned.transform), 0, 31)
        realigned = LandmarkSet.create(moved, aligned.pixels.shape).unwrap()
        again = align_face(aligned.pixels, realigned, 32, config).unwrap()
        assert float(np.mean(np.abs(again.pixels - aligned.pixels))) <= 0.01
