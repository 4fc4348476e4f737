import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from psmlab.cycle import ModelBundle
from psmlab.data_ingest import Dataset, au_statistics
from psmlab.errors import ErrorKind
from psmlab.face_align import AlignedCorpus
from psmlab.report import (
    ALIASES,
    MULTI_RUN_STYLES,
    STYLES,
    RunManifest,
    canonical_style,
    field,
    hash_path,
    neutral_consistency,
    noise_check,
    pixel_distance,
    report,
)


def probe_output(scale: float, au1_shift: float = 0.0) -> dict[str, Any]:
    spread = [0.0, 0.01, -0.01, 0.02, -0.02, 0.0]
    return {
        "mean_f1": 0.5 * scale,
        "per_au_f1": {"AU1": 0.4 * scale, "AU12": 0.6 * scale},
        "ci": {"AU1": [0.3 * scale, 0.5 * scale], "AU12": [0.5 * scale, 0.7 * scale]},
        "bootstrap": {
            "AU1": [0.4 + au1_shift + s for s in spread],
            "AU12": [0.6 + 5 * s for s in spread],
        },
    }


def profile(cluster_id: int, size: int, active: str) -> dict[str, Any]:
    freq = {f"AU{au}": 0.0 for au in (1, 2, 4, 5, 6, 9, 12, 15, 17, 20, 25, 26)}
    freq[active] = 1.0
    return {"cluster_id": cluster_id, "size": size, "au_frequency": freq}


PAYLOADS: dict[str, dict[str, Any]] = {
    "source_comparison": {
        "best": "psm",
        "sources": {
            "psm": {"mean_f1": 0.6, "p_vs_best": None, "significant": False},
            "gm": {"mean_f1": 0.4, "p_vs_best": 1e-6, "significant": True},
        },
    },
    "per_au": {"runs": {"psm": probe_output(1.0), "gm": probe_output(0.8, au1_shift=-0.1)}},
    "novelty": {
        "psm": {"profiles": [profile(0, 10, "AU12"), profile(1, 6, "AU26")]},
        "gm": {"profiles": [profile(0, 12, "AU12")]},
        "novelty": {
            "threshold": 0.8,
            "normalized": [[1.0], [0.0]],
            "psm": [{"cluster_id": 0, "is_novel": False}, {"cluster_id": 1, "is_novel": True}],
        },
    },
    "transfer": {
        "targets": {
            "SN001": {
                "approaches": {
                    "scratch_full": {"mean_f1": 0.6, "neutral_consistency": 10.0},
                    "scratch_short": {"mean_f1": 0.3, "neutral_consistency": 25.0},
                },
            },
            "SN002": {
                "approaches": {
                    "scratch_full": {"mean_f1": 0.5, "neutral_consistency": 12.0},
                    "scratch_short": {"mean_f1": 0.4, "neutral_consistency": 21.0},
                },
            },
        },
    },
    "learning_curve": {
        "runs": {"psm": {"curve": [[1, 0.2], [2, 0.4]]}, "gm": [[1, 0.1], [2, 0.3]]},
    },
}


def test_pixel_distance() -> None:
    a = np.zeros((2, 2, 3))
    b = np.zeros((2, 2, 3))
    b[0, 0] = [3.0, 4.0, 0.0]
    assert pixel_distance(a, b) == pytest.approx(5.0 / 4)
    assert pixel_distance(np.stack([a, b]), a).tolist() == pytest.approx([0.0, 1.25])


def test_neutral_consistency(bundle: ModelBundle, corpus: AlignedCorpus) -> None:
    frames = corpus.sequences["SN001"].pixels[:6]
    value = neutral_consistency(bundle, frames).unwrap()
    assert value >= 0.0
    assert neutral_consistency(bundle, frames[::-1]).unwrap() == pytest.approx(value, rel=1e-6)
    same = np.repeat(frames[:1], 3, axis=0)
    assert neutral_consistency(bundle, same).unwrap() == pytest.approx(0.0, abs=1e-6)
    error = neutral_consistency(bundle, frames[:1]).unwrap_err()
    assert error.kind is ErrorKind.TOO_FEW_FRAMES
    assert error.details["count"] == 1


def test_noise_check_report(bundle: ModelBundle, corpus: AlignedCorpus, caplog: pytest.LogCaptureFixture) -> None:
    frames = corpus.sequences["SN002"].pixels[:20]
    with caplog.at_level(logging.WARNING, logger="psmlab.report.quality"):
        outcome = noise_check(bundle, 10, frames, seed=2).unwrap()
    assert "UntrainedBundle" in caplog.text
    assert outcome.n_noise == 10
    assert outcome.noise_distances.shape == (10,)
    assert outcome.real_distances.shape == (20,)
    assert outcome.threshold == pytest.approx(np.percentile(outcome.real_distances, 95))
    assert outcome.fraction_beyond == pytest.approx(np.mean(outcome.noise_distances > outcome.threshold))
    assert outcome.passed == (outcome.fraction_beyond >= 0.95)
    payload = json.loads(json.dumps(outcome.to_dict()))
    assert len(payload["noise_distances"]) == 10
    again = noise_check(bundle, 10, frames, seed=2).unwrap()
    assert np.array_equal(again.noise_distances, outcome.noise_distances)


def test_noise_check_rejects_bad_params(bundle: ModelBundle, corpus: AlignedCorpus) -> None:
    frames = corpus.sequences["SN002"].pixels[:5]
    assert noise_check(bundle, 0, frames).unwrap_err().kind is ErrorKind.INVALID_PARAMS
    assert noise_check(bundle, 5, frames[:1]).unwrap_err().kind is ErrorKind.TOO_FEW_FRAMES


def test_manifest_write_and_load(tmp_path: Path) -> None:
    data = tmp_path / "input.txt"
    data.write_text("frames", encoding="utf-8")
    manifest = RunManifest("probe", ["probe", "--aligned", str(data)], {"probe": {"folds": 3}}, 7, "0.1.0")
    manifest.add_inputs([data, tmp_path / "absent"])
    manifest.add_outputs([tmp_path / "probe.json"])
    path = manifest.write(tmp_path / "run").unwrap()
    assert path.name == "manifest.json"
    assert manifest.finished is not None
    assert list(manifest.input_hashes) == [str(data)]

    for target in (path, tmp_path / "run"):
        loaded = RunManifest.load(target).unwrap()
        assert loaded == manifest
    assert loaded.outputs == [str(tmp_path / "probe.json")]


def test_manifest_load_failures(tmp_path: Path) -> None:
    assert RunManifest.load(tmp_path / "absent.json").unwrap_err().kind is ErrorKind.IO_FAILURE
    (tmp_path / "garbage.json").write_text("{not json", encoding="utf-8")
    assert RunManifest.load(tmp_path / "garbage.json").unwrap_err().kind is ErrorKind.IO_FAILURE

    (tmp_path / "partial.json").write_text(json.dumps({"command": "probe", "argv": []}), encoding="utf-8")
    error = RunManifest.load(tmp_path / "partial.json").unwrap_err()
    assert error.kind is ErrorKind.SCHEMA_MISMATCH
    assert error.details["missing"] == ["config", "seed", "version"]

    extra = {"command": "probe", "argv": [], "config": {}, "seed": 0, "version": "0", "colour": "red"}
    (tmp_path / "extra.json").write_text(json.dumps(extra), encoding="utf-8")
    assert RunManifest.load(tmp_path / "extra.json").unwrap_err().kind is ErrorKind.SCHEMA_MISMATCH


def test_hash_path(tmp_path: Path) -> None:
    one, two = tmp_path / "one", tmp_path / "two"
    for directory in (one, two):
        (directory / "sub").mkdir(parents=True)
        (directory / "sub" / "a.bin").write_bytes(b"abc")
    assert hash_path(one) == hash_path(two)
    assert hash_path(one / "sub" / "a.bin") == hash_path(two / "sub" / "a.bin")
    (two / "sub" / "a.bin").rename(two / "sub" / "b.bin")
    assert hash_path(one) != hash_path(two)


def test_field() -> None:
    payload = {"a": {"b": 3, "c": None}}
    assert field(payload, "a.b").unwrap() == 3
    for path, missing in [("a.x", "a.x"), ("a.c", "a.c"), ("z.b", "z"), ("a.b.d", "a.b.d")]:
        error = field(payload, path).unwrap_err()
        assert error.kind is ErrorKind.SCHEMA_MISMATCH
        assert error.details["field"] == missing


@pytest.mark.parametrize("style", sorted(PAYLOADS))
def test_report_writes_images_and_tables(style: str, tmp_path: Path) -> None:
    written = report(PAYLOADS[style], style, tmp_path / "a").unwrap()
    assert all(p.exists() for p in written)
    assert any(p.suffix == ".png" for p in written)
    assert {p.suffix for p in written} >= {".csv", ".json"}
    assert all(p.name.startswith(style) for p in written)

    again = report(PAYLOADS[style], style, tmp_path / "b").unwrap()
    for first, second in zip(written, again, strict=True):
        assert first.name == second.name
        assert first.read_bytes() == second.read_bytes()


def test_learning_curve_has_one_series_per_run(tmp_path: Path) -> None:
    written = report(PAYLOADS["learning_curve"], "fig6", tmp_path).unwrap()
    rows = json.loads(next(p for p in written if p.suffix == ".json").read_text(encoding="utf-8"))
    assert sorted({r["run"] for r in rows}) == ["gm", "psm"]
    assert len(rows) == 4


def test_novelty_table_marks_novel_clusters(tmp_path: Path) -> None:
    written = report(PAYLOADS["novelty"], "fig4", tmp_path).unwrap()
    assert {p.name for p in written} == {
        "novelty_heatmap.png",
        "novelty_clusters.png",
        "novelty.csv",
        "novelty.json",
    }
    rows = json.loads((tmp_path / "novelty.json").read_text(encoding="utf-8"))
    assert [(r["cluster"], r["novel"]) for r in rows] == [(0, False), (1, True)]


def test_per_au_table_has_mean_row(tmp_path: Path) -> None:
    report(PAYLOADS["per_au"], "per_au", tmp_path).unwrap()
    rows = json.loads((tmp_path / "per_au.json").read_text(encoding="utf-8"))
    assert [r["au"] for r in rows] == ["AU1", "AU12", "mean"]
    assert rows[-1]["psm"] == pytest.approx(0.5)
    assert rows[-1]["gm"] == pytest.approx(0.4)


def test_dataset_stats_from_statistics(dataset: Dataset, tmp_path: Path) -> None:
    payload = json.loads(json.dumps(au_statistics(dataset).unwrap().to_dict()))
    written = report(payload, "dataset_stats", tmp_path).unwrap()
    rows = json.loads(next(p for p in written if p.suffix == ".json").read_text(encoding="utf-8"))
    assert len(rows) == 12


def test_report_names_missing_field(tmp_path: Path) -> None:
    broken = {"runs": {"psm": {"mean_f1": 0.5}}}
    error = report(broken, "per_au", tmp_path).unwrap_err()
    assert error.kind is ErrorKind.SCHEMA_MISMATCH
    assert error.details["field"] == "per_au_f1"
    assert "per_au_f1" in str(error)
    assert report({}, "transfer", tmp_path).unwrap_err().details["field"] == "targets"


def test_report_rejects_unknown_style(tmp_path: Path) -> None:
    error = report({}, "histogram", tmp_path).unwrap_err()
    assert error.kind is ErrorKind.INVALID_PARAMS
    assert error.details["styles"] == list(STYLES)


@pytest.mark.parametrize(("alias", "figure"), sorted((a, f) for a, f in ALIASES.items() if a in PAYLOADS))
def test_figure_names_render_like_their_aliases(alias: str, figure: str, tmp_path: Path) -> None:
    assert canonical_style(alias).unwrap() == figure
    assert canonical_style(figure).unwrap() == figure
    by_figure = report(PAYLOADS[alias], figure, tmp_path / "figure").unwrap()
    by_alias = report(PAYLOADS[alias], alias, tmp_path / "alias").unwrap()
    assert [p.name for p in by_figure] == [p.name for p in by_alias]
    for first, second in zip(by_figure, by_alias, strict=True):
        assert first.read_bytes() == second.read_bytes()


def test_every_figure_has_an_alias() -> None:
    assert set(ALIASES.values()) == set(STYLES) - set(ALIASES)
    assert MULTI_RUN_STYLES == {ALIASES["per_au"], ALIASES["learning_curve"]}


def test_per_au_marks_significant_differences(tmp_path: Path) -> None:
    report(PAYLOADS["per_au"], "fig3", tmp_path).unwrap()
    rows = {r["au"]: r for r in json.loads((tmp_path / "per_au.json").read_text(encoding="utf-8"))}
    assert rows["AU1"]["p_gm"] < 0.05
    assert rows["AU12"]["p_gm"] == pytest.approx(1.0)
    assert rows["mean"]["p_gm"] is None
    assert "p_psm" not in rows["AU1"]


def test_per_au_without_bootstrap_has_no_p_values(tmp_path: Path) -> None:
    runs = {label: {"per_au_f1": probe_output(scale)["per_au_f1"]} for label, scale in (("psm", 1.0), ("gm", 0.8))}
    report({"runs": runs}, "fig3", tmp_path).unwrap()
    rows = json.loads((tmp_path / "per_au.json").read_text(encoding="utf-8"))
    assert set(rows[0]) == {"au", "psm", "gm"}
