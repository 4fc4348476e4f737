import dataclasses
import itertools
import logging
from typing import Any

import numpy as np
import numpy.typing as npt

from psmlab.data_ingest.au import AU_NUMBERS, N_AUS, au_label
from psmlab.data_ingest.dataset import Dataset
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class AUStatistics:
    """Dataset-level AU statistics.

    Attributes:
        per_au_frequency (np.ndarray): Fraction of all frames with each AU active
        per_subject_frequency (dict[str, np.ndarray]): Same, per subject
        cooccurrence (np.ndarray): ``[i, j] = P(AU_i = 1 | AU_j = 1)``; NaN where AU_j never fires
        temporal_correlation (float): Mean Pearson correlation of binary AU series over subject pairs and AUs
        per_au_temporal_correlation (np.ndarray): The same mean, per AU (NaN when no pair is defined)
        per_subject_temporal_correlation (np.ndarray): Subject x subject mean over AUs
        correlation_pairs (int): Number of (subject pair, AU) correlations that were defined
        truncated_length (int): Common length the series were truncated to
        active_au_count_over_time (np.ndarray): Mean number of active AUs per frame position across subjects
        au_frequency_over_time (np.ndarray): ``positions x 12`` fraction of subjects with each AU active
        discard_ratio (float): Fraction of frames with missing landmarks
        identities (tuple[str, ...]): Subject order of the per-subject arrays
    """

    per_au_frequency: FloatArray
    per_subject_frequency: dict[str, FloatArray]
    cooccurrence: FloatArray
    temporal_correlation: float
    per_au_temporal_correlation: FloatArray
    per_subject_temporal_correlation: FloatArray
    correlation_pairs: int
    truncated_length: int
    active_au_count_over_time: FloatArray
    au_frequency_over_time: FloatArray
    discard_ratio: float
    identities: tuple[str, ...]

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready report; undefined values become ``None``."""
        return {
            "aus": [au_label(a) for a in AU_NUMBERS],
            "identities": list(self.identities),
            "per_au_frequency": _json(self.per_au_frequency),
            "per_subject_frequency": {k: _json(v) for k, v in self.per_subject_frequency.items()},
            "cooccurrence": _json(self.cooccurrence),
            "cooccurrence_convention": "column-conditioned: [i][j] = P(AU_i=1 | AU_j=1)",
            "temporal_correlation": _json(np.float64(self.temporal_correlation)),
            "per_au_temporal_correlation": _json(self.per_au_temporal_correlation),
            "per_subject_temporal_correlation": _json(self.per_subject_temporal_correlation),
            "correlation_pairs": self.correlation_pairs,
            "truncated_length": self.truncated_length,
            "truncation_note": "series truncated to the shortest subject before correlating",
            "active_au_count_over_time": _json(self.active_au_count_over_time),
            "au_frequency_over_time": _json(self.au_frequency_over_time),
            "discard_ratio": self.discard_ratio,
        }


def _json(values: npt.NDArray[Any] | np.floating[Any]) -> Any:
    array = np.asarray(values, dtype=np.float64)
    out = np.where(np.isfinite(array), array, np.nan).tolist()
    if isinstance(out, float):
        return None if np.isnan(out) else out
    return _nan_to_none(out)


def _nan_to_none(values: Any) -> Any:
    if isinstance(values, list):
        return [_nan_to_none(v) for v in values]
    if isinstance(values, float) and np.isnan(values):
        return None
    return values


def cooccurrence_matrix(labels: npt.NDArray[np.bool_]) -> FloatArray:
    """Column-conditioned co-occurrence ``P(AU_i | AU_j)`` of an ``n x k`` binary matrix."""
    b = labels.astype(np.float64)
    joint = b.T @ b
    support = b.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(support[None, :] > 0, joint / support[None, :], np.nan)


def pearson_or_none(a: FloatArray, b: FloatArray) -> float | None:
    """Pearson correlation, ``None`` when either series is constant."""
    da, db = a - a.mean(), b - b.mean()
    denom = float(np.sqrt((da @ da) * (db @ db)))
    if denom == 0.0:
        return None
    return float((da @ db) / denom)


def au_statistics(dataset: Dataset) -> Result[AUStatistics, PsmError]:
    """Frequencies, co-occurrence and cross-subject temporal correlation of AU activity.

    Zero-variance series are excluded from the correlation mean rather than counted as 0.

    Args:
        dataset (Dataset): Non-empty dataset

    Returns:
        Result[AUStatistics, PsmError]: The statistics, or ``EmptyDataset``
    """
    identities = dataset.identities
    if len(dataset) == 0:
        return fail(ErrorKind.EMPTY_DATASET, "cannot compute statistics of an empty dataset")

    series = {i: dataset.label_matrix(i) for i in identities}
    nonempty = [i for i in identities if len(series[i])]
    stacked = np.concatenate([series[i] for i in nonempty], axis=0)
    per_subject = {i: series[i].mean(axis=0).astype(np.float64) for i in nonempty}

    length = min(len(series[i]) for i in nonempty)
    n_sub = len(identities)
    pair_sum = np.zeros((n_sub, n_sub))
    pair_cnt = np.zeros((n_sub, n_sub))
    au_sum = np.zeros(N_AUS)
    au_cnt = np.zeros(N_AUS)
    for (ia, a), (ib, b) in itertools.combinations(enumerate(identities), 2):
        if not len(series[a]) or not len(series[b]):
            continue
        for col in range(N_AUS):
            r = pearson_or_none(
                series[a][:length, col].astype(np.float64),
                series[b][:length, col].astype(np.float64),
            )
            if r is None:
                continue
            au_sum[col] += r
            au_cnt[col] += 1
            pair_sum[ia, ib] += r
            pair_cnt[ia, ib] += 1
    pair_sum += pair_sum.T
    pair_cnt += pair_cnt.T
    with np.errstate(invalid="ignore", divide="ignore"):
        per_au_corr = np.where(au_cnt > 0, au_sum / au_cnt, np.nan)
        per_subject_corr = np.where(pair_cnt > 0, pair_sum / pair_cnt, np.nan)
    np.fill_diagonal(per_subject_corr, 1.0)
    total = int(au_cnt.sum())
    mean_corr = float(au_sum.sum() / total) if total else float("nan")
    if total == 0:
        logger.warning("no defined cross-subject AU correlation (need two subjects with varying AUs)")

    aligned = np.stack([series[i][:length] for i in nonempty], axis=0)  # subjects x positions x aus
    return Ok(
        AUStatistics(
            per_au_frequency=stacked.mean(axis=0).astype(np.float64),
            per_subject_frequency=per_subject,
            cooccurrence=cooccurrence_matrix(stacked),
            temporal_correlation=mean_corr,
            per_au_temporal_correlation=per_au_corr,
            per_subject_temporal_correlation=per_subject_corr,
            correlation_pairs=total,
            truncated_length=length,
            active_au_count_over_time=aligned.sum(axis=2).mean(axis=0).astype(np.float64),
            au_frequency_over_time=aligned.mean(axis=0).astype(np.float64),
            discard_ratio=dataset.discard_ratio(),
            identities=identities,
        ),
    )
