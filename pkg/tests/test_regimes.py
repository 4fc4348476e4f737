import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from psmlab.config import CurriculumConfig, ModelConfig, RegimeConfig
from psmlab.cycle import ModelBundle
from psmlab.errors import ErrorKind
from psmlab.face_align import AlignedCorpus
from psmlab.regimes import (
    APPROACHES,
    Trainer,
    check_compatible,
    curriculum_distance,
    epochs_to_fraction_of_final,
    probe_learning_curve,
    run_transfer_study,
    sample_pair,
    sample_pairs,
    scratch_short,
    subsample_frames,
    train_gm,
    train_psm,
    train_regime,
    transfer,
)
from tests.conftest import FAST_PROBE, TINY_MODEL, TINY_REGIME, TINY_TRAIN

RAMP = CurriculumConfig(d_min=1, d_max=101, ramp_epochs=100)


@pytest.mark.parametrize(("epoch", "expected"), [(0, 1), (50, 51), (99, 100), (100, 101), (1000, 101)])
def test_linear_curriculum(epoch: int, expected: int) -> None:
    assert curriculum_distance(epoch, RAMP) == expected


def test_staircase_curriculum() -> None:
    stairs = dataclasses.replace(RAMP, shape="staircase", steps=4)
    values = [curriculum_distance(e, stairs) for e in range(0, 101, 5)]
    assert values[0] == 1
    assert values[-1] == 101
    assert sorted(set(values)) == [1, 26, 51, 76, 101]
    assert all(a <= b for a, b in zip(values, values[1:], strict=False))


def test_curriculum_is_monotone() -> None:
    values = [curriculum_distance(e, RAMP) for e in range(200)]
    assert all(a <= b for a, b in zip(values, values[1:], strict=False))
    assert curriculum_distance(0, dataclasses.replace(RAMP, ramp_epochs=0)) == 101


@st.composite
def curricula(draw: st.DrawFn) -> CurriculumConfig:
    d_min = draw(st.integers(min_value=1, max_value=50))
    return CurriculumConfig(
        d_min=d_min,
        d_max=d_min + draw(st.integers(min_value=0, max_value=200)),
        ramp_epochs=draw(st.integers(min_value=1, max_value=300)),
        shape=draw(st.sampled_from(["linear", "staircase"])),
        steps=draw(st.integers(min_value=1, max_value=10)),
    )


@settings(max_examples=80, deadline=None)
@given(curricula())
def test_curriculum_endpoints_and_monotonicity(config: CurriculumConfig) -> None:
    values = [curriculum_distance(e, config) for e in range(config.ramp_epochs + 5)]
    assert values[0] == config.d_min
    assert values[config.ramp_epochs :] == [config.d_max] * 5
    assert all(a <= b for a, b in zip(values, values[1:], strict=False))
    assert min(values) >= config.d_min
    assert max(values) <= config.d_max


def test_sample_pairs_needs_two_frames(rng: np.random.Generator) -> None:
    assert sample_pairs(1, 4, 0, None, rng).unwrap_err().kind is ErrorKind.SEQUENCE_TOO_SHORT
    assert sample_pair([], 0, RAMP, rng).unwrap_err().kind is ErrorKind.SEQUENCE_TOO_SHORT


def test_unrestricted_pairs_never_repeat_a_frame(rng: np.random.Generator) -> None:
    i, j = sample_pairs(7, 5000, 0, None, rng).unwrap()
    assert np.all(i != j)
    assert i.min() == 0
    assert j.max() == 6


def test_curriculum_pairs_respect_distance(rng: np.random.Generator) -> None:
    i, j = sample_pairs(500, 5000, 10, RAMP, rng).unwrap()
    distance = np.abs(i - j)
    assert distance.min() == 1
    assert distance.max() == curriculum_distance(10, RAMP)
    assert np.all((i >= 0) & (i < 500) & (j >= 0) & (j < 500))
    assert 0.45 < np.mean(i < j) < 0.55


def test_curriculum_distance_is_uniform(rng: np.random.Generator) -> None:
    i, j = sample_pairs(300, 20_000, 9, RAMP, rng).unwrap()
    limit = curriculum_distance(9, RAMP)
    counts = np.bincount(np.abs(i - j), minlength=limit + 1)[1:]
    assert stats.chisquare(counts).pvalue > 1e-3


def test_short_sequence_caps_distance(rng: np.random.Generator) -> None:
    i, j = sample_pairs(4, 200, 1000, RAMP, rng).unwrap()
    assert np.abs(i - j).max() <= 3
    assert sample_pair(range(5), 0, RAMP, rng).map(lambda p: abs(p[0] - p[1])).unwrap() == 1


def test_ten_thousand_gaps_pass_chi_square() -> None:
    rng = np.random.default_rng(2024)
    limit = curriculum_distance(50, RAMP)
    i, j = sample_pairs(4860, 10_000, 50, RAMP, rng).unwrap()
    counts = np.bincount(np.abs(i - j), minlength=limit + 1)
    assert counts[0] == 0
    assert len(counts) == limit + 1
    assert stats.chisquare(counts[1:]).pvalue > 0.05


def test_subsampled_pairs_measure_distance_in_source_frames(rng: np.random.Generator) -> None:
    kept = subsample_frames(4860, 0.1)
    stride = int(np.diff(kept).max())
    assert stride <= curriculum_distance(10, RAMP)
    for epoch in (10, 50, 100):
        limit = curriculum_distance(epoch, RAMP)
        i, j = sample_pairs(len(kept), 5000, epoch, RAMP, rng, frames=kept).unwrap()
        gaps = np.abs(kept[i] - kept[j])
        assert np.all(i != j)
        assert gaps.max() <= limit
        assert gaps.max() > limit - stride
    i, j = sample_pairs(len(kept), 500, 0, RAMP, rng, frames=kept).unwrap()
    assert np.all(np.abs(i - j) == 1)


def test_sample_pairs_rejects_bad_frame_indices(rng: np.random.Generator) -> None:
    for frames in ([0, 5], [0, 5, 5], [4, 2, 9]):
        error = sample_pairs(3, 4, 0, RAMP, rng, frames=frames).unwrap_err()
        assert error.kind is ErrorKind.LENGTH_MISMATCH


def test_subsample_frames() -> None:
    assert len(subsample_frames(4860, 0.1)) == 486
    kept = subsample_frames(100, 0.1)
    assert kept[0] == 0
    assert kept[-1] == 99
    assert np.all(np.diff(kept) > 0)
    assert subsample_frames(10, 1.0).tolist() == list(range(10))
    assert len(subsample_frames(10, 0.01)) == 2


def test_check_compatible(corpus: AlignedCorpus) -> None:
    assert check_compatible(TINY_MODEL, corpus).is_ok()
    wide = dataclasses.replace(TINY_MODEL, image_size=32)
    assert check_compatible(wide, corpus).unwrap_err().kind is ErrorKind.CONFIG_MISMATCH
    gray = dataclasses.replace(TINY_MODEL, in_channels=1)
    assert check_compatible(gray, corpus).unwrap_err().kind is ErrorKind.CONFIG_MISMATCH


def test_train_psm(corpus: AlignedCorpus) -> None:
    bundle = train_psm(corpus, "SN002", TINY_REGIME, TINY_MODEL, TINY_TRAIN).unwrap()
    assert bundle.provenance.regime == "psm"
    assert bundle.provenance.identities == ("SN002",)
    assert bundle.provenance.epochs_trained == 2
    assert bundle.provenance.frames_used == 60
    assert bundle.is_finite()
    again = train_psm(corpus, "SN002", TINY_REGIME, TINY_MODEL, TINY_TRAIN).unwrap()
    assert again.digest() == bundle.digest()


def test_train_psm_with_curriculum_is_labelled(corpus: AlignedCorpus) -> None:
    regime = dataclasses.replace(TINY_REGIME, epochs=1, curriculum=CurriculumConfig(d_min=1, d_max=10, ramp_epochs=5))
    bundle = train_psm(corpus, "SN001", regime, TINY_MODEL, TINY_TRAIN).unwrap()
    assert bundle.provenance.regime == "curriculum"


def test_train_psm_failures(corpus: AlignedCorpus) -> None:
    assert train_psm(corpus, "SN404", TINY_REGIME, TINY_MODEL).unwrap_err().kind is ErrorKind.UNKNOWN_IDENTITY
    wide = dataclasses.replace(TINY_MODEL, image_size=32)
    assert train_psm(corpus, "SN001", TINY_REGIME, wide).unwrap_err().kind is ErrorKind.CONFIG_MISMATCH
    negative = dataclasses.replace(TINY_REGIME, epochs=-1)
    assert train_psm(corpus, "SN001", negative, TINY_MODEL).unwrap_err().kind is ErrorKind.INVALID_CONFIG


def test_train_gm_uses_everyone(corpus: AlignedCorpus) -> None:
    bundle = train_gm(corpus, dataclasses.replace(TINY_REGIME, regime="gm", epochs=1), TINY_MODEL, TINY_TRAIN).unwrap()
    assert bundle.provenance.regime == "gm"
    assert bundle.provenance.identities == corpus.identities
    assert bundle.provenance.frames_used == 180


def test_transfer_with_zero_epochs_keeps_parameters(corpus: AlignedCorpus, bundle: ModelBundle) -> None:
    regime = RegimeConfig(regime="transfer_from_gm", epochs=0)
    moved = transfer(bundle, corpus, "SN003", regime).unwrap()
    assert moved is not bundle
    assert moved.same_parameters(bundle)
    assert moved.provenance.parent == bundle.provenance


def test_transfer_leaves_pretrained_untouched(corpus: AlignedCorpus) -> None:
    pretrained = train_psm(corpus, "SN001", TINY_REGIME, TINY_MODEL, TINY_TRAIN).unwrap()
    snapshot = pretrained.clone()
    regime = RegimeConfig(regime="transfer_from_psm", epochs=1, frame_fraction=0.5)
    moved = transfer(pretrained, corpus, "SN002", regime, TINY_TRAIN).unwrap()
    assert pretrained.same_parameters(snapshot)
    assert not moved.same_parameters(pretrained)
    assert moved.provenance.regime == "transfer"
    assert moved.provenance.identities == ("SN002",)
    assert moved.provenance.frames_used == 30
    assert moved.provenance.total_epochs == 3
    assert moved.provenance.parent == pretrained.provenance


def test_trainer_continues_decay_epochs(corpus: AlignedCorpus) -> None:
    pretrained = train_psm(corpus, "SN001", TINY_REGIME, TINY_MODEL, TINY_TRAIN).unwrap()
    trainer = Trainer.create(pretrained.clone(), [corpus.sequences["SN002"]], TINY_REGIME, TINY_TRAIN)
    assert trainer.epoch_offset == 2
    history = trainer.run(2).unwrap()
    assert len(history) == 2
    assert history[0].neutral_symmetric_weight == pytest.approx(0.98**2)
    assert trainer.epoch == 2


def test_scratch_short(corpus: AlignedCorpus) -> None:
    regime = RegimeConfig(regime="scratch_short", epochs=1, frame_fraction=0.1)
    bundle = scratch_short(corpus, "SN003", regime, TINY_MODEL, TINY_TRAIN).unwrap()
    assert bundle.provenance.regime == "scratch"
    assert bundle.provenance.frames_used == 6


def test_train_regime_dispatch(corpus: AlignedCorpus, bundle: ModelBundle) -> None:
    psm = RegimeConfig(regime="psm", epochs=0)
    assert train_regime(corpus, psm, TINY_MODEL).unwrap_err().kind is ErrorKind.INVALID_CONFIG
    assert train_regime(corpus, psm, TINY_MODEL, identity="SN001").unwrap().provenance.regime == "psm"
    gm = RegimeConfig(regime="gm", epochs=0)
    assert train_regime(corpus, gm, TINY_MODEL).unwrap().provenance.regime == "gm"
    move = RegimeConfig(regime="transfer_from_gm", epochs=0)
    assert train_regime(corpus, move, TINY_MODEL, identity="SN001").unwrap_err().kind is ErrorKind.INVALID_CONFIG
    moved = train_regime(corpus, move, TINY_MODEL, identity="SN001", pretrained=bundle).unwrap()
    assert moved.provenance.regime == "transfer"


def test_epochs_to_fraction_of_final() -> None:
    assert epochs_to_fraction_of_final([(10, 0.2), (20, 0.7), (30, 0.75)]) == 20
    assert epochs_to_fraction_of_final([(10, 0.5), (20, 0.4)]) == 10
    assert epochs_to_fraction_of_final([(5, 0.1), (10, 0.2)], fraction=1.0) == 10


def test_probe_learning_curve(corpus: AlignedCorpus) -> None:
    regime = dataclasses.replace(TINY_REGIME, epochs=3)
    curve = probe_learning_curve(corpus, "SN001", regime, TINY_MODEL, TINY_TRAIN, FAST_PROBE, eval_every=2).unwrap()
    assert [epoch for epoch, _ in curve] == [2, 3]
    assert all(0.0 <= f1 <= 1.0 for _, f1 in curve)
    error = probe_learning_curve(corpus, "SN001", regime, TINY_MODEL, eval_every=0).unwrap_err()
    assert error.kind is ErrorKind.INVALID_PARAMS


def test_transfer_study_needs_two_persons(corpus: AlignedCorpus) -> None:
    alone = corpus.subset(["SN001"]).unwrap()
    error = run_transfer_study(alone, TINY_MODEL, TINY_REGIME, TINY_REGIME).unwrap_err()
    assert error.kind is ErrorKind.TOO_FEW_IDENTITIES


def test_transfer_study(corpus: AlignedCorpus) -> None:
    full = RegimeConfig(epochs=1)
    short = RegimeConfig(epochs=1, frame_fraction=0.5)
    study = run_transfer_study(corpus, TINY_MODEL, full, short, TINY_TRAIN, FAST_PROBE, targets=["SN001"]).unwrap()
    outcomes = study.outcomes["SN001"]
    assert tuple(outcomes) == APPROACHES
    assert outcomes["psm_transfer"].sources == ("SN002", "SN003")
    assert all(o.replicate_means.shape == (FAST_PROBE.n_bootstrap,) for o in outcomes.values())
    assert all(o.neutral_consistency >= 0.0 for o in outcomes.values())
    assert len(study.p_values["SN001"]) == 6
    assert "psm|gm_transfer" in study.p_values["SN001"]
    report = study.to_dict()
    assert report["approaches"] == list(APPROACHES)
    assert set(report["targets"]["SN001"]["approaches"]) == set(APPROACHES)


def test_model_config_mismatch_stops_transfer(corpus: AlignedCorpus) -> None:
    other = ModelBundle.create(ModelConfig(image_size=32, embedding_dim=8, channels=(4, 8))).unwrap()
    error = transfer(other, corpus, "SN001", RegimeConfig(regime="transfer_from_gm", epochs=0)).unwrap_err()
    assert error.kind is ErrorKind.CONFIG_MISMATCH
