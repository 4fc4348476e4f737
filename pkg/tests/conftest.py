import numpy as np
import pytest

from psmlab.config import AlignConfig, ModelConfig, ProbeConfig, RegimeConfig, SynthConfig, TrainConfig
from psmlab.cycle import ModelBundle
from psmlab.data_ingest import Dataset, synth_generate
from psmlab.face_align import AlignedCorpus, FrameLandmarks, align_dataset

for _module in (
    "tests.test_outcome",
    "tests.test_config",
    "tests.test_data_ingest",
    "tests.test_face_align",
    "tests.test_cycle",
    "tests.test_regimes",
    "tests.test_probe",
    "tests.test_cluster",
    "tests.test_report",
    "tests.test_cli",
    "tests.test_acceptance",
):
    pytest.register_assert_rewrite(_module)

TINY_SYNTH = SynthConfig(subjects=3, frames_per_subject=60, image_size=48, seed=3)
TINY_ALIGN = AlignConfig(out_size=16)
TINY_MODEL = ModelConfig(image_size=16, in_channels=3, embedding_dim=8, channels=(4, 8))
TINY_TRAIN = TrainConfig(lr=1e-3, batch_size=8, pairs_per_epoch=16)
TINY_REGIME = RegimeConfig(regime="psm", epochs=2, seed=0)
FAST_PROBE = ProbeConfig(epochs=30, n_bootstrap=20)


@pytest.fixture(scope="session")
def dataset() -> Dataset:
    return synth_generate(TINY_SYNTH).unwrap()


@pytest.fixture(scope="session")
def corpus(dataset: Dataset) -> AlignedCorpus:
    return align_dataset(dataset, FrameLandmarks(), TINY_ALIGN).unwrap()


@pytest.fixture
def bundle() -> ModelBundle:
    return ModelBundle.create(TINY_MODEL, seed=0).unwrap()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
