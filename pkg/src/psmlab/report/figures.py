"""Figure-style plots and tables from pipeline outputs.

Styles are named after the figure they lay out (``fig2`` to ``fig6`` and ``sfig2``); each also
answers to a descriptive alias such as ``novelty``, which is the stem of the files it writes.
Every style reads the JSON a pipeline stage wrote and emits PNG images plus a CSV and a
JSON table. Figures render through matplotlib's Agg canvas without timestamps, so reruns give identical
tables and, for a fixed matplotlib version, identical images.
"""

import json
import logging
from collections.abc import Callable, Mapping
from pathlib import Path
from types import MappingProxyType
from typing import Any, Literal, cast, get_args

import numpy as np
import pandas as pd
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

from psmlab.data_ingest.au import AU_NUMBERS, au_label
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result, question, result
from psmlab.probe.metrics import compare_distributions

logger = logging.getLogger(__name__)

Style = Literal["fig2", "fig3", "fig4", "fig5", "fig6", "sfig2"]
ALIASES: Mapping[str, Style] = MappingProxyType(
    {
        "source_comparison": "fig2",
        "per_au": "fig3",
        "novelty": "fig4",
        "transfer": "fig5",
        "learning_curve": "fig6",
        "dataset_stats": "sfig2",
    },
)
STYLES: tuple[str, ...] = (*get_args(Style), *ALIASES)
MULTI_RUN_STYLES: frozenset[Style] = frozenset({"fig3", "fig6"})
SIGNIFICANCE = 0.05
_PNG_METADATA = {"Software": None}
_AU_NAMES = [au_label(au) for au in AU_NUMBERS]


def field(payload: Mapping[str, Any], path: str) -> Result[Any, PsmError]:
    """Value at a dotted path, or ``SchemaMismatch`` naming the first missing field."""
    value: Any = payload
    walked: list[str] = []
    for key in path.split("."):
        walked.append(key)
        if not isinstance(value, Mapping) or key not in value or value[key] is None:
            return fail(ErrorKind.SCHEMA_MISMATCH, f"missing field {'.'.join(walked)!r}", field=".".join(walked))
        value = value[key]
    return Ok(value)


def _save_figure(figure: Figure, path: Path) -> Path:
    figure.savefig(path, format="png", dpi=100, metadata=_PNG_METADATA)
    return path


def _save_table(table: pd.DataFrame, stem: Path) -> list[Path]:
    csv = stem.with_suffix(".csv")
    table.to_csv(csv, index=False, float_format="%.6f")
    js = stem.with_suffix(".json")
    records = json.loads(table.to_json(orient="records", double_precision=10))
    js.write_text(json.dumps(records, indent=2, sort_keys=True), encoding="utf-8")
    return [csv, js]


def _star(p: float | None, alpha: float = 1e-4) -> str:
    return "*" if p is not None and p < alpha else ""


@result
def _source_comparison(payload: Mapping[str, Any], out: Path) -> Result[list[Path], PsmError]:
    """Bar chart of person-independent mean F1 per embedding source, stars against the best."""
    sources = question(field(payload, "sources"))
    best = question(field(payload, "best"))
    rows = []
    for name, entry in sources.items():
        rows.append(
            {
                "source": name,
                "mean_f1": float(question(field(entry, "mean_f1"))),
                "p_vs_best": entry.get("p_vs_best"),
                "significant": bool(entry.get("significant", False)),
            },
        )
    table = pd.DataFrame(rows, columns=["source", "mean_f1", "p_vs_best", "significant"])
    figure = Figure(figsize=(max(4, 1.2 * len(rows)), 4))
    ax = figure.subplots()
    colors = ["tab:orange" if r["source"] == best else "tab:blue" for r in rows]
    bars = ax.bar(table["source"], table["mean_f1"], color=colors)
    for bar, row in zip(bars, rows, strict=True):
        ax.text(bar.get_x() + bar.get_width() / 2, bar.get_height(), _star(row["p_vs_best"]), ha="center", va="bottom")
    ax.set_ylabel("mean F1")
    ax.set_ylim(0, 1.05)
    ax.set_title("person-independent probe")
    figure.tight_layout()
    return Ok([_save_figure(figure, out / "source_comparison.png"), *_save_table(table, out / "source_comparison")])


@result
def _per_au(payload: Mapping[str, Any], out: Path) -> Result[list[Path], PsmError]:
    """Per-AU F1 of several runs side by side, with 95% intervals.

    The first run is the reference. A run whose output carries per-AU ``bootstrap``
    distributions, like the reference, gets a Welch p-value column ``p_<run>`` and a star on
    every bar with ``p < 0.05``.
    """
    runs = question(field(payload, "runs"))
    if not runs:
        return fail(ErrorKind.SCHEMA_MISMATCH, "missing field 'runs' entries", field="runs")
    columns: dict[str, dict[str, float]] = {}
    intervals: dict[str, dict[str, list[float]]] = {}
    for label, run in runs.items():
        columns[label] = question(field(run, "per_au_f1"))
        intervals[label] = run.get("ci", {})
    reference, *others = runs
    p_values: dict[str, dict[str, float]] = {}
    baseline = runs[reference].get("bootstrap")
    for label in others:
        if baseline and runs[label].get("bootstrap"):
            p_values[label] = question(compare_distributions(baseline, runs[label]["bootstrap"]))
    per_run = {label: [f1.get(au) for au in _AU_NAMES] for label, f1 in columns.items()}
    table = pd.DataFrame({"au": _AU_NAMES} | per_run)
    table = table.dropna(how="all", subset=list(columns))
    mean_row = {"au": "mean"} | {label: float(np.nanmean(table[label].astype(float))) for label in columns}
    table = pd.concat([table, pd.DataFrame([mean_row])], ignore_index=True)
    for label, ps in p_values.items():
        table[f"p_{label}"] = [ps.get(au, np.nan) for au in table["au"]]

    figure = Figure(figsize=(max(6, 0.6 * len(table) * len(columns)), 4))
    ax = figure.subplots()
    x = np.arange(len(table))
    width = 0.8 / len(columns)
    for k, label in enumerate(columns):
        values = table[label].astype(float).to_numpy()
        bounds = intervals[label]
        pairs = zip(table["au"], values, strict=True)
        errors = np.array([bounds.get(au, [v, v]) for au, v in pairs], dtype=np.float64)
        yerr = np.abs(np.vstack([values - errors[:, 0], errors[:, 1] - values]))
        bars = ax.bar(x + k * width, np.nan_to_num(values), width, yerr=np.nan_to_num(yerr), label=label, capsize=2)
        if label not in p_values:
            continue
        tops = np.nan_to_num(values) + np.nan_to_num(yerr[1])
        for bar, top, p in zip(bars, tops, table[f"p_{label}"], strict=True):
            ax.text(bar.get_x() + bar.get_width() / 2, top, _star(p, SIGNIFICANCE), ha="center", va="bottom")
    ax.set_xticks(x + width * (len(columns) - 1) / 2, table["au"], rotation=45)
    ax.set_ylabel("F1")
    ax.set_ylim(0, 1.05)
    ax.legend()
    figure.tight_layout()
    return Ok([_save_figure(figure, out / "per_au.png"), *_save_table(table, out / "per_au")])


@result
def _novelty(payload: Mapping[str, Any], out: Path) -> Result[list[Path], PsmError]:
    """Novelty heatmap plus AU bar plots of the PSM clusters; novel clusters are boxed in green."""
    normalized = np.array(question(field(payload, "novelty.normalized")), dtype=np.float64)
    verdicts = question(field(payload, "novelty.psm"))
    profiles = question(field(payload, "psm.profiles"))
    gm_profiles = question(field(payload, "gm.profiles"))
    threshold = float(payload["novelty"].get("threshold", 0.8))

    heat = Figure(figsize=(1 + 0.5 * normalized.shape[1], 1 + 0.5 * normalized.shape[0]))
    ax = heat.subplots()
    image = ax.imshow(normalized, vmin=0, vmax=1, cmap="viridis")
    ax.set_xticks(range(len(gm_profiles)), [f"GM{p['cluster_id']}" for p in gm_profiles])
    ax.set_yticks(range(len(profiles)), [f"PSM{p['cluster_id']}" for p in profiles])
    heat.colorbar(image, ax=ax, label=f"normalized metric (novel < {threshold})")
    heat.tight_layout()

    novel = {v["cluster_id"] for v in verdicts if v.get("is_novel")}
    bars = Figure(figsize=(6, 1.6 * max(1, len(profiles))))
    axes = np.atleast_1d(bars.subplots(max(1, len(profiles)), 1, squeeze=False)[:, 0])
    rows = []
    for ax, profile in zip(axes, profiles, strict=False):
        freq = [profile["au_frequency"][au] for au in _AU_NAMES]
        ax.bar(_AU_NAMES, freq, color="tab:gray")
        ax.set_ylim(0, 1)
        ax.set_ylabel(f"PSM{profile['cluster_id']}")
        ax.tick_params(axis="x", labelsize=7)
        if profile["cluster_id"] in novel:
            box = Rectangle(
                (0, 0),
                1,
                1,
                transform=ax.transAxes,
                fill=False,
                edgecolor="green",
                linewidth=3,
                clip_on=False,
            )
            ax.add_patch(box)
        summary = {"cluster": profile["cluster_id"], "size": profile["size"], "novel": profile["cluster_id"] in novel}
        rows.append(summary | dict(zip(_AU_NAMES, freq, strict=True)))
    bars.tight_layout()
    table = pd.DataFrame(rows, columns=["cluster", "size", "novel", *_AU_NAMES])
    return Ok(
        [
            _save_figure(heat, out / "novelty_heatmap.png"),
            _save_figure(bars, out / "novelty_clusters.png"),
            *_save_table(table, out / "novelty"),
        ],
    )


@result
def _transfer(payload: Mapping[str, Any], out: Path) -> Result[list[Path], PsmError]:
    """Transfer study: F1 and neutral consistency per approach, averaged over targets."""
    targets = question(field(payload, "targets"))
    rows = []
    for target, entry in targets.items():
        for approach, outcome in question(field(entry, "approaches")).items():
            rows.append(
                {
                    "target": target,
                    "approach": approach,
                    "mean_f1": float(question(field(outcome, "mean_f1"))),
                    "neutral_consistency": float(question(field(outcome, "neutral_consistency"))),
                },
            )
    table = pd.DataFrame(rows, columns=["target", "approach", "mean_f1", "neutral_consistency"])
    order = list(dict.fromkeys(table["approach"]))
    summary = table.groupby("approach", sort=False)[["mean_f1", "neutral_consistency"]].mean().reindex(order)
    figure = Figure(figsize=(9, 4))
    left, right = figure.subplots(1, 2)
    left.bar(order, summary["mean_f1"], color="tab:blue")
    left.set_ylabel("mean F1")
    left.set_ylim(0, 1.05)
    right.bar(order, summary["neutral_consistency"], color="tab:green")
    right.set_ylabel("neutral consistency (0-255)")
    for ax in (left, right):
        ax.tick_params(axis="x", rotation=30)
    figure.tight_layout()
    return Ok([_save_figure(figure, out / "transfer.png"), *_save_table(table, out / "transfer")])


def _curve(run: Any) -> Result[list[list[float]], PsmError]:
    if isinstance(run, list):
        return Ok(run)
    return field(run, "curve")


@result
def _learning_curve(payload: Mapping[str, Any], out: Path) -> Result[list[Path], PsmError]:
    """Probe F1 over training epochs, one series per run."""
    runs = question(field(payload, "runs"))
    if not runs:
        return fail(ErrorKind.SCHEMA_MISMATCH, "missing field 'runs' entries", field="runs")
    figure = Figure(figsize=(6, 4))
    ax = figure.subplots()
    rows = []
    for label, run in runs.items():
        points = np.array(question(_curve(run)), dtype=np.float64).reshape(-1, 2)
        ax.plot(points[:, 0], points[:, 1], marker="o", label=label)
        rows.extend({"run": label, "epoch": int(e), "mean_f1": float(f)} for e, f in points)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean F1")
    ax.legend()
    figure.tight_layout()
    table = pd.DataFrame(rows, columns=["run", "epoch", "mean_f1"])
    return Ok([_save_figure(figure, out / "learning_curve.png"), *_save_table(table, out / "learning_curve")])


@result
def _dataset_stats(payload: Mapping[str, Any], out: Path) -> Result[list[Path], PsmError]:
    """Dataset statistics: AU frequencies, co-occurrence and active AUs over time."""
    aus = question(field(payload, "aus"))
    frequency = np.array(question(field(payload, "per_au_frequency")), dtype=np.float64)
    cooccurrence = np.array(question(field(payload, "cooccurrence")), dtype=np.float64)
    over_time = np.array(question(field(payload, "active_au_count_over_time")), dtype=np.float64)
    figure = Figure(figsize=(12, 4))
    freq_ax, co_ax, time_ax = figure.subplots(1, 3)
    freq_ax.bar(aus, frequency, color="tab:blue")
    freq_ax.tick_params(axis="x", rotation=45)
    freq_ax.set_ylabel("fraction of frames active")
    image = co_ax.imshow(np.nan_to_num(cooccurrence), vmin=0, vmax=1, cmap="magma")
    co_ax.set_xticks(range(len(aus)), aus, rotation=90)
    co_ax.set_yticks(range(len(aus)), aus)
    figure.colorbar(image, ax=co_ax)
    time_ax.plot(over_time, color="tab:red")
    time_ax.set_xlabel("frame")
    time_ax.set_ylabel("mean active AUs")
    figure.tight_layout()
    table = pd.DataFrame({"au": aus, "frequency": frequency})
    return Ok([_save_figure(figure, out / "dataset_stats.png"), *_save_table(table, out / "dataset_stats")])


_RENDERERS: dict[Style, Callable[[Mapping[str, Any], Path], Result[list[Path], PsmError]]] = {
    "fig2": _source_comparison,
    "fig3": _per_au,
    "fig4": _novelty,
    "fig5": _transfer,
    "fig6": _learning_curve,
    "sfig2": _dataset_stats,
}


def canonical_style(style: str) -> Result[Style, PsmError]:
    """The figure style named by ``style``, resolving descriptive aliases.

    Example:
        >>> canonical_style("novelty")
        Ok('fig4')
    """
    resolved = ALIASES.get(style, style)
    if resolved not in _RENDERERS:
        return fail(ErrorKind.INVALID_PARAMS, f"unknown report style {style!r}", styles=list(STYLES))
    return Ok(cast("Style", resolved))


@result
def report(run_outputs: Mapping[str, Any], style: str, out_dir: Path) -> Result[list[Path], PsmError]:
    """Render one figure style.

    Args:
        run_outputs (Mapping[str, Any]): JSON written by the matching stage; ``fig3`` and ``fig6``
            take ``{"runs": {label: output}}``
        style (str): One of ``STYLES``, a figure name or its descriptive alias
        out_dir (Path): Directory for images and tables

    Returns:
        Result[list[Path], PsmError]: Written files, or ``SchemaMismatch`` naming the missing field
    """
    canonical = question(canonical_style(style))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = _RENDERERS[canonical](run_outputs, out_dir)
    except OSError as e:
        return fail(ErrorKind.IO_FAILURE, f"cannot write {canonical} report to {out_dir}: {e}")
    if written.is_ok():
        logger.info("%s report: %s", canonical, ", ".join(p.name for p in written.unwrap()))
    return written
