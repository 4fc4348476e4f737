"""``psmlab`` command line.

Every command writes its outputs and a ``manifest.json`` under ``--out``. Exit codes:
0 success, 2 validation error, 3 runtime or numeric error.
"""

import argparse
import dataclasses
import json
import logging
import shlex
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

import psmlab
from psmlab.cluster import analyze_person, summarize_cluster_differences
from psmlab.config import CurriculumConfig, PsmLabConfig, RegimeName, cache_dir, load_config
from psmlab.cycle import ModelBundle
from psmlab.data_ingest import au_statistics, load_disfa, synth_generate, write_disfa_tree
from psmlab.errors import EXIT_OK, ErrorKind, PsmError, fail
from psmlab.face_align import (
    AlignedCorpus,
    ExternalDetector,
    FrameLandmarks,
    LandmarkDirectory,
    LandmarkSource,
    align_dataset,
)
from psmlab.logs import configure_logging
from psmlab.outcome import Ok, Result, question, result
from psmlab.probe import (
    EmbeddingSource,
    EmbeddingTable,
    ProbeResult,
    compare_embedding_sources,
    embed_corpus,
    eval_person_dependent,
    eval_person_independent,
    sequence_embeddings,
)
from psmlab.regimes import probe_learning_curve, run_transfer_study, train_regime
from psmlab.report import (
    MULTI_RUN_STYLES,
    STYLES,
    RunManifest,
    canonical_style,
    neutral_consistency,
    noise_check,
    report,
)

logger = logging.getLogger(__name__)

REGIME_FLAGS: dict[str, RegimeName] = {
    "psm": "psm",
    "gm": "gm",
    "transfer-gm": "transfer_from_gm",
    "transfer-psm": "transfer_from_psm",
    "scratch": "scratch_short",
}


@dataclasses.dataclass(slots=True)
class Context:
    """What a command handler gets: parsed flags, resolved config and the run manifest."""

    args: argparse.Namespace
    config: PsmLabConfig
    out: Path
    manifest: RunManifest


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=float), encoding="utf-8")
    return path


def _load_corpus(ctx: Context) -> Result[AlignedCorpus, PsmError]:
    ctx.manifest.add_inputs([ctx.args.aligned])
    return AlignedCorpus.load(ctx.args.aligned)


def _load_bundle(ctx: Context, path: Path) -> Result[ModelBundle, PsmError]:
    ctx.manifest.add_inputs([path])
    return ModelBundle.load(path)


def _labelled(spec: str) -> tuple[str, Path]:
    """``label=path`` or a bare path labelled by its name."""
    label, sep, path = spec.partition("=")
    return (label, Path(path)) if sep else (Path(spec).with_suffix("").name, Path(spec))


@result
def _load_source(ctx: Context, path: Path) -> Result[EmbeddingSource, PsmError]:
    """A bundle directory or an embedding file stem."""
    if path.is_dir():
        return Ok(question(_load_bundle(ctx, path)))
    stem = path.with_suffix("")
    ctx.manifest.add_inputs([stem.with_suffix(".json"), stem.with_suffix(".f32")])
    return Ok(question(EmbeddingTable.load(stem)))


@result
def cmd_ingest(ctx: Context) -> Result[list[Path], PsmError]:
    ctx.manifest.add_inputs([p for p in (ctx.args.root, ctx.args.landmark_dir) if p is not None])
    dataset = question(load_disfa(ctx.args.root, ctx.args.landmarks, verify_images=not ctx.args.skip_image_check))
    stats = question(au_statistics(dataset))
    summary = {
        "identities": list(dataset.identities),
        "frames": len(dataset),
        "frame_size": list(dataset.metadata.frame_size),
        "statistics": stats.to_dict(),
    }
    return Ok([write_json(ctx.out / "stats.json", stats.to_dict()), write_json(ctx.out / "dataset.json", summary)])


@result
def cmd_synth(ctx: Context) -> Result[list[Path], PsmError]:
    dataset = question(synth_generate(ctx.config.synth))
    root = question(write_disfa_tree(dataset, ctx.out / "disfa", ctx.out / "landmarks"))
    stats = question(au_statistics(dataset))
    return Ok([root, ctx.out / "landmarks", write_json(ctx.out / "stats.json", stats.to_dict())])


def _landmark_source(args: argparse.Namespace) -> LandmarkSource:
    if args.detector:
        return ExternalDetector(tuple(shlex.split(args.detector)))
    if args.landmark_dir:
        return LandmarkDirectory(args.landmark_dir)
    return FrameLandmarks()


@result
def cmd_align(ctx: Context) -> Result[list[Path], PsmError]:
    ctx.manifest.add_inputs([p for p in (ctx.args.root, ctx.args.landmark_dir) if p is not None])
    dataset = question(load_disfa(ctx.args.root, ctx.args.landmarks, verify_images=False))
    corpus = question(align_dataset(dataset, _landmark_source(ctx.args), ctx.config.align, workers=ctx.args.workers))
    directory = question(corpus.save(ctx.out / "aligned"))
    return Ok([directory])


@result
def cmd_train(ctx: Context) -> Result[list[Path], PsmError]:
    corpus = question(_load_corpus(ctx))
    regime, model, train = ctx.config.regime, ctx.config.model, ctx.config.train
    if ctx.args.learning_curve:
        if ctx.args.identity is None:
            return fail(ErrorKind.INVALID_CONFIG, "--learning-curve needs --identity")
        curve = question(
            probe_learning_curve(
                corpus,
                ctx.args.identity,
                regime,
                model,
                train,
                ctx.config.probe,
                ctx.args.learning_curve,
            ),
        )
        return Ok([write_json(ctx.out / "curve.json", {"identity": ctx.args.identity, "curve": curve})])
    pretrained = question(_load_bundle(ctx, ctx.args.pretrained)) if ctx.args.pretrained else None
    bundle = question(train_regime(corpus, regime, model, train, identity=ctx.args.identity, pretrained=pretrained))
    directory = question(bundle.save(ctx.out / "bundle"))
    return Ok([directory])


@result
def cmd_embed(ctx: Context) -> Result[list[Path], PsmError]:
    corpus = question(_load_corpus(ctx))
    bundle = question(_load_bundle(ctx, ctx.args.bundle))
    table = question(embed_corpus(bundle, corpus, None if ctx.args.no_cache else cache_dir()))
    stem = question(table.save(ctx.out / ctx.args.name))
    return Ok([stem.with_suffix(".f32"), stem.with_suffix(".json")])


def _aggregate(results: dict[str, ProbeResult]) -> dict[str, Any]:
    """Per-AU means over persons, alongside every person's own result.

    ``bootstrap`` averages the persons' replicates index by index, so it can be compared
    against another source's aggregate.
    """
    per_au: dict[str, list[float]] = {}
    replicates: dict[str, list[list[float]]] = {}
    for res in results.values():
        payload = res.to_dict()
        for au, f1 in payload["per_au_f1"].items():
            per_au.setdefault(au, []).append(f1)
            replicates.setdefault(au, []).append(payload["bootstrap"][au])
    bootstrap = {au: np.mean(np.array(v), axis=0) for au, v in replicates.items()}
    return {
        "protocol": "person_dependent",
        "per_au_f1": {au: float(np.mean(v)) for au, v in per_au.items()},
        "ci": {au: np.percentile(v, [2.5, 97.5]).tolist() for au, v in bootstrap.items()},
        "bootstrap": {au: v.tolist() for au, v in bootstrap.items()},
        "mean_f1": float(np.mean([r.mean_f1 for r in results.values()])) if results else None,
        "per_identity": {identity: res.to_dict() for identity, res in results.items()},
    }


@result
def cmd_probe(ctx: Context) -> Result[list[Path], PsmError]:
    corpus = question(_load_corpus(ctx))
    sources = {label: question(_load_source(ctx, path)) for label, path in map(_labelled, ctx.args.source)}
    probe = ctx.config.probe
    written: list[Path] = []
    if ctx.args.protocol == "independent":
        if len(sources) > 1:
            comparison = question(compare_embedding_sources(sources, corpus, probe.folds, probe))
            written.append(write_json(ctx.out / "comparison.json", comparison.to_dict()))
            comparison.table().to_csv(ctx.out / "comparison.csv", index=False, float_format="%.6f")
            return Ok([*written, ctx.out / "comparison.csv"])
        outcome = question(eval_person_independent(next(iter(sources.values())), corpus, probe.folds, probe))
        outcome.table().to_csv(ctx.out / "probe.csv", index=False, float_format="%.6f")
        return Ok([write_json(ctx.out / "probe.json", outcome.to_dict()), ctx.out / "probe.csv"])

    identities = ctx.args.identity or list(corpus.identities)
    for label, source in sources.items():
        results = {i: question(eval_person_dependent(source, corpus, i, probe)) for i in identities}
        target = ctx.out / label if len(sources) > 1 else ctx.out
        written.append(write_json(target / "probe.json", _aggregate(results)))
    return Ok(written)


@result
def cmd_cluster(ctx: Context) -> Result[list[Path], PsmError]:
    corpus = question(_load_corpus(ctx))
    gm = question(_load_bundle(ctx, ctx.args.gm))
    psms = {label: question(_load_bundle(ctx, path)) for label, path in map(_labelled, ctx.args.psm)}
    written: list[Path] = []
    differences: dict[str, float] = {}
    for identity, psm in psms.items():
        sequence = question(corpus.sequence(identity))
        keys = [f"{identity}:{i}" for i in sequence.indices]
        analysis = question(
            analyze_person(
                question(sequence_embeddings(psm, sequence)),
                question(sequence_embeddings(gm, sequence)),
                sequence.labels,
                ctx.config.cluster,
                keys,
            ),
        )
        differences[identity] = analysis.difference
        written.append(write_json(ctx.out / f"cluster_{identity}.json", analysis.to_dict()))
    if len(differences) >= 2:  # noqa: PLR2004
        summary = question(summarize_cluster_differences(differences))
        written.append(write_json(ctx.out / "cluster_summary.json", summary.to_dict()))
    return Ok(written)


@result
def cmd_transfer_eval(ctx: Context) -> Result[list[Path], PsmError]:
    corpus = question(_load_corpus(ctx))
    full = dataclasses.replace(ctx.config.regime, epochs=ctx.args.full_epochs or ctx.config.regime.epochs)
    short = dataclasses.replace(
        ctx.config.regime,
        regime="scratch_short",
        epochs=ctx.args.short_epochs,
        frame_fraction=ctx.args.short_fraction,
        curriculum=None,
    )
    study = question(
        run_transfer_study(corpus, ctx.config.model, full, short, ctx.config.train, ctx.config.probe, ctx.args.target),
    )
    return Ok([write_json(ctx.out / "transfer.json", study.to_dict())])


@result
def cmd_noise_check(ctx: Context) -> Result[list[Path], PsmError]:
    corpus = question(_load_corpus(ctx))
    bundle = question(_load_bundle(ctx, ctx.args.bundle))
    sequence = question(corpus.sequence(ctx.args.identity))
    outcome = question(noise_check(bundle, ctx.args.n, sequence.pixels, ctx.config.regime.seed))
    payload = outcome.to_dict() | {"neutral_consistency": question(neutral_consistency(bundle, sequence.pixels[:100]))}
    return Ok([write_json(ctx.out / "noise.json", payload)])


@result
def cmd_report(ctx: Context) -> Result[list[Path], PsmError]:
    several = question(canonical_style(ctx.args.style)) in MULTI_RUN_STYLES
    if not several and len(ctx.args.input) != 1:
        return fail(ErrorKind.INVALID_PARAMS, f"{ctx.args.style} takes exactly one input")
    payloads: dict[str, Any] = {}
    for label, path in map(_labelled, ctx.args.input):
        ctx.manifest.add_inputs([path])
        try:
            payloads[label] = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            return fail(ErrorKind.IO_FAILURE, f"cannot read report input {path}: {e}")
    run_outputs: dict[str, Any] = {"runs": payloads} if several else next(iter(payloads.values()))
    return report(run_outputs, ctx.args.style, ctx.out)


HANDLERS: dict[str, Callable[[Context], Result[list[Path], PsmError]]] = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "align": cmd_align,
    "train": cmd_train,
    "embed": cmd_embed,
    "probe": cmd_probe,
    "cluster": cmd_cluster,
    "transfer-eval": cmd_transfer_eval,
    "noise-check": cmd_noise_check,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psmlab", description="Person-specific facial motion models")
    parser.add_argument("--version", action="version", version=f"psmlab {psmlab.__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML configuration file")
    common.add_argument("--out", type=Path, default=Path("psmlab-run"), help="run directory for all outputs")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    common.add_argument("--seed", type=int, help="seed of the run")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="load a DISFA-format tree and report AU statistics")
    p.add_argument("--root", type=Path, required=True)
    p.add_argument("--landmarks", type=Path)
    p.add_argument("--skip-image-check", action="store_true")

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset in DISFA layout")
    p.add_argument("--subjects", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--image-size", type=int)

    p = sub.add_parser("align", parents=[common], help="detect, align and crop every frame")
    p.add_argument("--root", type=Path, required=True)
    p.add_argument("--landmarks", type=Path)
    located = p.add_mutually_exclusive_group()
    located.add_argument("--detector", help="external landmark detector command")
    located.add_argument("--landmark-dir", type=Path, help="per-frame landmark files <dir>/<identity>/<index>.txt")
    p.add_argument("--size", type=int)
    p.add_argument("--grayscale", action="store_true", default=None)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("train", parents=[common], help="train a model under one regime")
    p.add_argument("--aligned", type=Path, required=True)
    p.add_argument("--regime", choices=sorted(REGIME_FLAGS), default="psm")
    p.add_argument("--identity")
    p.add_argument("--epochs", type=int)
    p.add_argument("--frame-fraction", type=float)
    p.add_argument("--curriculum", help="linear:dmin,dmax,ramp or staircase:dmin,dmax,ramp[,steps]")
    p.add_argument("--pretrained", type=Path, help="bundle to fine-tune for transfer regimes")
    p.add_argument("--learning-curve", type=int, metavar="EVERY", help="probe every EVERY epochs instead of saving")

    p = sub.add_parser("embed", parents=[common], help="export embeddings of every aligned frame")
    p.add_argument("--aligned", type=Path, required=True)
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--name", default="embeddings")
    p.add_argument("--no-cache", action="store_true")

    p = sub.add_parser("probe", parents=[common], help="linear-probe evaluation")
    p.add_argument("--aligned", type=Path, required=True)
    p.add_argument("--source", action="append", required=True, help="[label=]bundle dir or embedding file")
    p.add_argument("--protocol", choices=["dependent", "independent"], default="dependent")
    p.add_argument("--identity", action="append")
    p.add_argument("--folds", type=int)
    p.add_argument("--bootstraps", type=int)

    p = sub.add_parser("cluster", parents=[common], help="PSM vs GM cluster analysis")
    p.add_argument("--aligned", type=Path, required=True)
    p.add_argument("--gm", type=Path, required=True)
    p.add_argument("--psm", action="append", required=True, help="identity=bundle dir")
    p.add_argument("--space", choices=["raw", "pca"])
    p.add_argument("--distance", choices=["l1", "l2"])

    p = sub.add_parser("transfer-eval", parents=[common], help="compare the four transfer approaches")
    p.add_argument("--aligned", type=Path, required=True)
    p.add_argument("--full-epochs", type=int)
    p.add_argument("--short-epochs", type=int, default=10)
    p.add_argument("--short-fraction", type=float, default=0.1)
    p.add_argument("--target", action="append")

    p = sub.add_parser("noise-check", parents=[common], help="neutral faces of random noise inputs")
    p.add_argument("--aligned", type=Path, required=True)
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--identity", required=True)
    p.add_argument("--n", type=int, default=100)

    p = sub.add_parser("report", parents=[common], help="render figure-style plots and tables")
    p.add_argument("--style", choices=STYLES, required=True)
    p.add_argument("--input", action="append", required=True, help="[label=]stage output JSON")

    p = sub.add_parser("rerun", parents=[common], help="re-execute the command recorded in a manifest")
    p.add_argument("manifest", type=Path)
    return parser


@result
def resolve_config(args: argparse.Namespace) -> Result[PsmLabConfig, PsmError]:
    """Config file values overridden by command-line flags."""
    config = question(load_config(args.config))
    get = lambda name: getattr(args, name, None)  # noqa: E731
    curriculum = question(CurriculumConfig.parse(args.curriculum)) if get("curriculum") else None
    config = config.with_overrides(
        "synth",
        subjects=get("subjects"),
        frames_per_subject=get("frames"),
        image_size=get("image_size"),
        seed=get("seed"),
    )
    config = config.with_overrides("align", out_size=get("size"), grayscale=get("grayscale"))
    config = config.with_overrides(
        "regime",
        regime=REGIME_FLAGS[args.regime] if get("regime") else None,
        epochs=get("epochs"),
        frame_fraction=get("frame_fraction"),
        seed=get("seed"),
        curriculum=curriculum,
    )
    config = config.with_overrides("probe", folds=get("folds"), n_bootstrap=get("bootstraps"), seed=get("seed"))
    config = config.with_overrides("cluster", space=get("space"), distance=get("distance"))
    question(config.regime.validate())
    return Ok(config)


def _replayable(manifest: RunManifest) -> Result[RunManifest, PsmError]:
    if manifest.command == "rerun":
        return fail(ErrorKind.INVALID_PARAMS, "a rerun manifest cannot be rerun")
    return Ok(manifest)


def _rerun(args: argparse.Namespace) -> int:
    recorded = RunManifest.load(args.manifest).and_then(_replayable)
    if recorded.is_err():
        logger.error("%s", recorded.unwrap_err())
        return recorded.unwrap_err().kind.exit_code
    manifest = recorded.unwrap()
    logger.info("rerunning %s %s", manifest.command, " ".join(manifest.argv))
    return main(manifest.argv)


def main(argv: Sequence[str] | None = None) -> int:
    """Run one ``psmlab`` command and return its exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    if args.command == "rerun":
        return _rerun(args)

    resolved = resolve_config(args)
    if resolved.is_err():
        error = resolved.unwrap_err()
        logger.error("%s", error)
        return error.kind.exit_code
    config = resolved.unwrap()
    seed = args.seed if args.seed is not None else config.regime.seed
    manifest = RunManifest(args.command, argv, config.snapshot(), seed, psmlab.__version__)
    ctx = Context(args, config, args.out, manifest)
    logger.info("%s: started, writing to %s", args.command, args.out)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        outcome = HANDLERS[args.command](ctx)
    except OSError as e:
        outcome = fail(ErrorKind.IO_FAILURE, str(e))
    if outcome.is_ok():
        manifest.add_outputs(outcome.unwrap())
        code = EXIT_OK
    else:
        error = outcome.unwrap_err()
        logger.error("%s failed: %s", args.command, error)
        manifest.status = str(error.kind)
        code = error.kind.exit_code
    written = manifest.write(args.out)
    if written.is_err():
        logger.error("%s", written.unwrap_err())
        return written.unwrap_err().kind.exit_code
    logger.info("%s: finished with exit code %d", args.command, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
