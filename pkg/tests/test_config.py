from pathlib import Path

import pytest

from psmlab.config import (
    CACHE_ENV,
    CurriculumConfig,
    PsmLabConfig,
    RegimeConfig,
    cache_dir,
    load_config,
)
from psmlab.errors import ErrorKind


def test_defaults_without_file() -> None:
    config = load_config(None).unwrap()
    assert config == PsmLabConfig()
    assert config.model.embedding_dim == 256
    assert config.probe.n_bootstrap == 100
    assert config.probe.min_activity == 0.02
    assert config.cluster.threshold == 0.8
    assert len(config.cluster.eps_values) * len(config.cluster.min_samples_values) == 40


def test_load_nested_sections(tmp_path: Path) -> None:
    path = tmp_path / "psmlab.yaml"
    path.write_text(
        "model:\n"
        "  image_size: 16\n"
        "  channels: [4, 8]\n"
        "train:\n"
        "  lr: 1\n"
        "  decay:\n"
        "    gamma: 0.9\n"
        "regime:\n"
        "  epochs: 10\n"
        "  curriculum: linear:1,11,5\n",
        encoding="utf-8",
    )
    config = load_config(path).unwrap()
    assert config.model.channels == (4, 8)
    assert config.train.lr == 1.0
    assert isinstance(config.train.lr, float)
    assert config.train.decay.gamma == 0.9
    assert config.regime.curriculum == CurriculumConfig(d_min=1, d_max=11, ramp_epochs=5)


@pytest.mark.parametrize(
    ("text", "kind"),
    [
        ("model:\n  nonsense: 1\n", ErrorKind.INVALID_CONFIG),
        ("model:\n  image_size: big\n", ErrorKind.INVALID_CONFIG),
        ("cluster:\n  distance: l3\n", ErrorKind.INVALID_CONFIG),
        ("- a list\n", ErrorKind.INVALID_CONFIG),
        ("model: [unclosed\n", ErrorKind.INVALID_CONFIG),
    ],
)
def test_bad_config(tmp_path: Path, text: str, kind: ErrorKind) -> None:
    path = tmp_path / "bad.yaml"
    path.write_text(text, encoding="utf-8")
    assert load_config(path).unwrap_err().kind is kind


def test_missing_config_file(tmp_path: Path) -> None:
    assert load_config(tmp_path / "absent.yaml").unwrap_err().kind is ErrorKind.IO_FAILURE


def test_with_overrides_ignores_unset_values() -> None:
    config = PsmLabConfig()
    assert config.with_overrides("regime", epochs=None) is config
    updated = config.with_overrides("regime", epochs=7, seed=None)
    assert updated.regime.epochs == 7
    assert updated.regime.seed == config.regime.seed
    assert config.regime.epochs == 500


def test_snapshot_is_plain_data() -> None:
    snapshot = PsmLabConfig().snapshot()
    assert snapshot["regime"]["curriculum"] is None
    assert snapshot["train"]["decay"]["w_min"] == 0.05


def test_curriculum_parse() -> None:
    assert CurriculumConfig.parse("staircase:2,20,40,5").unwrap() == CurriculumConfig(2, 20, 40, "staircase", 5)
    for text in ("linear:1,2", "cubic:1,2,3", "linear:a,b,c", "linear:5,1,10"):
        assert CurriculumConfig.parse(text).unwrap_err().kind is ErrorKind.INVALID_CONFIG


def test_regime_validate() -> None:
    assert RegimeConfig(frame_fraction=0.1).validate().is_ok()
    assert RegimeConfig(frame_fraction=0.0).validate().is_err()
    assert RegimeConfig(epochs=-1).validate().is_err()
    assert RegimeConfig(curriculum=CurriculumConfig(d_min=0)).validate().is_err()


def test_cache_dir_from_environment(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    monkeypatch.setenv(CACHE_ENV, str(tmp_path))
    assert cache_dir() == tmp_path
    monkeypatch.delenv(CACHE_ENV)
    assert cache_dir().name == "psmlab"
