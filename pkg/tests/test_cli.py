import json
from pathlib import Path

import numpy as np
import pytest

from psmlab.cli import build_parser, main
from psmlab.errors import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION
from psmlab.face_align import AlignedCorpus
from psmlab.report import RunManifest

CONFIG = """\
model:
  image_size: 16
  embedding_dim: 8
  channels: [4, 8]
train:
  batch_size: 8
  pairs_per_epoch: 16
probe:
  epochs: 30
  n_bootstrap: 10
"""


@pytest.fixture(scope="module")
def run(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """A synthesized, aligned, trained and embedded run directory tree."""
    root = tmp_path_factory.mktemp("run")
    config = root / "psmlab.yaml"
    config.write_text(CONFIG, encoding="utf-8")
    common = ["--config", str(config)]
    steps = [
        [
            "synth",
            "--out",
            str(root / "synth"),
            "--subjects",
            "3",
            "--frames",
            "60",
            "--image-size",
            "48",
            "--seed",
            "3",
        ],
        [
            "align",
            "--out",
            str(root / "align"),
            "--root",
            str(root / "synth" / "disfa"),
            "--landmarks",
            str(root / "synth" / "landmarks"),
            "--size",
            "16",
        ],
        ["train", "--out", str(root / "train"), "--aligned", str(root / "align" / "aligned"), "--identity", "SN001"],
        [
            "embed",
            "--out",
            str(root / "embed"),
            "--aligned",
            str(root / "align" / "aligned"),
            "--bundle",
            str(root / "train" / "bundle"),
            "--no-cache",
        ],
    ]
    for step in steps:
        args = [*step, *common]
        if step[0] == "train":
            args += ["--epochs", "1"]
        assert main(args) == EXIT_OK, step[0]
    return root


def test_pipeline_writes_manifests(run: Path) -> None:
    for stage in ("synth", "align", "train", "embed"):
        manifest = RunManifest.load(run / stage).unwrap()
        assert manifest.command == stage
        assert manifest.status == "ok"
        assert manifest.finished is not None
        assert manifest.config["model"]["embedding_dim"] == 8
    assert (run / "synth" / "stats.json").exists()
    assert (run / "train" / "bundle" / "bundle.json").exists()
    assert (run / "embed" / "embeddings.f32").exists()
    align = RunManifest.load(run / "align").unwrap()
    assert str(run / "synth" / "disfa") in align.input_hashes


def test_align_reads_a_landmark_directory(run: Path) -> None:
    out = run / "align_dir"
    args = [
        "align",
        "--out",
        str(out),
        "--config",
        str(run / "psmlab.yaml"),
        "--root",
        str(run / "synth" / "disfa"),
        "--landmark-dir",
        str(run / "synth" / "landmarks"),
        "--size",
        "16",
    ]
    assert main(args) == EXIT_OK
    by_directory = AlignedCorpus.load(out / "aligned").unwrap()
    by_ingest = AlignedCorpus.load(run / "align" / "aligned").unwrap()
    assert by_directory.identities == by_ingest.identities
    for identity, sequence in by_ingest.sequences.items():
        assert by_directory.sequences[identity].indices.tolist() == sequence.indices.tolist()
        assert np.allclose(by_directory.sequences[identity].pixels, sequence.pixels)
    assert str(run / "synth" / "landmarks") in RunManifest.load(out).unwrap().input_hashes


def test_probe_then_report(run: Path) -> None:
    probe_out = run / "probe"
    args = [
        "probe",
        "--out",
        str(probe_out),
        "--config",
        str(run / "psmlab.yaml"),
        "--aligned",
        str(run / "align" / "aligned"),
        "--source",
        f"psm={run / 'train' / 'bundle'}",
        "--identity",
        "SN001",
    ]
    assert main(args) == EXIT_OK
    payload = json.loads((probe_out / "probe.json").read_text(encoding="utf-8"))
    assert payload["protocol"] == "person_dependent"
    assert set(payload["per_identity"]) == {"SN001"}
    assert set(payload["bootstrap"]) == set(payload["per_au_f1"]) == set(payload["ci"])
    assert all(len(v) == 10 for v in payload["bootstrap"].values())

    report_out = run / "report"
    style = ["--style", "per_au", "--input", f"psm={probe_out / 'probe.json'}"]
    assert main(["report", "--out", str(report_out), *style]) == EXIT_OK
    table = (report_out / "per_au.csv").read_bytes()
    assert (report_out / "per_au.png").exists()

    assert main(["rerun", str(report_out / "manifest.json")]) == EXIT_OK
    assert (report_out / "per_au.csv").read_bytes() == table


def test_embed_table_matches_probe_source(run: Path) -> None:
    out = run / "probe_table"
    args = [
        "probe",
        "--out",
        str(out),
        "--config",
        str(run / "psmlab.yaml"),
        "--aligned",
        str(run / "align" / "aligned"),
        "--source",
        str(run / "embed" / "embeddings"),
        "--identity",
        "SN001",
    ]
    assert main(args) == EXIT_OK
    from_table = json.loads((out / "probe.json").read_text(encoding="utf-8"))
    from_bundle = json.loads((run / "probe" / "probe.json").read_text(encoding="utf-8"))
    assert from_table["per_au_f1"] == pytest.approx(from_bundle["per_au_f1"], abs=1e-6)


def test_validation_errors_exit_with_two(run: Path) -> None:
    out = run / "bad_identity"
    config, aligned = str(run / "psmlab.yaml"), str(run / "align" / "aligned")
    args = ["train", "--out", str(out), "--config", config, "--aligned", aligned]
    assert main([*args, "--identity", "SN999", "--epochs", "1"]) == EXIT_VALIDATION
    assert RunManifest.load(out).unwrap().status == "UnknownIdentity"
    assert main([*args, "--identity", "SN001", "--frame-fraction", "1.5"]) == EXIT_VALIDATION
    two_inputs = ["--input", "a.json", "--input", "b.json"]
    assert main(["report", "--out", str(out), "--style", "fig4", *two_inputs]) == EXIT_VALIDATION


def test_runtime_errors_exit_with_three(tmp_path: Path) -> None:
    code = main(["report", "--out", str(tmp_path), "--style", "transfer", "--input", str(tmp_path / "absent.json")])
    assert code == EXIT_RUNTIME
    assert RunManifest.load(tmp_path).unwrap().status == "IoFailure"


def test_rerun_needs_a_manifest(tmp_path: Path) -> None:
    assert main(["rerun", str(tmp_path / "missing.json")]) == EXIT_RUNTIME
    RunManifest("rerun", ["rerun", "x.json"], {}, 0, "0").write(tmp_path).unwrap()
    assert main(["rerun", str(tmp_path / "manifest.json")]) == EXIT_VALIDATION


def test_parser_lists_every_command() -> None:
    parser = build_parser()
    for command in ("ingest", "synth", "align", "train", "embed", "probe", "cluster", "transfer-eval", "noise-check"):
        assert parser.parse_args(_minimal(command)).command == command
    for style in ("fig2", "fig3", "fig4", "fig5", "fig6", "sfig2", "novelty"):
        assert parser.parse_args(["report", "--style", style, "--input", "x.json"]).style == style
    with pytest.raises(SystemExit):
        parser.parse_args(["align", "--root", "r", "--detector", "d", "--landmark-dir", "l"])


def _minimal(command: str) -> list[str]:
    required = {
        "ingest": ["--root", "r"],
        "synth": [],
        "align": ["--root", "r"],
        "train": ["--aligned", "a"],
        "embed": ["--aligned", "a", "--bundle", "b"],
        "probe": ["--aligned", "a", "--source", "s"],
        "cluster": ["--aligned", "a", "--gm", "g", "--psm", "SN001=p"],
        "transfer-eval": ["--aligned", "a"],
        "noise-check": ["--aligned", "a", "--bundle", "b", "--identity", "SN001"],
    }
    return [command, *required[command]]
