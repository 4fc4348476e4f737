"""F1, bootstrap confidence intervals and significance tests."""

import dataclasses
import logging
from collections.abc import Mapping
from typing import TypeVar

import numpy as np
import numpy.typing as npt
from scipy import stats

from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result, question, result

logger = logging.getLogger(__name__)

BoolLike = npt.ArrayLike
K = TypeVar("K", int, str)


def _f1_from_counts(
    tp: npt.NDArray[np.float64],
    fp: npt.NDArray[np.float64],
    fn: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """Vectorized ``2RP / (R + P)``, 0 wherever precision and recall are both 0."""
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        recall = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        denom = precision + recall
        return np.where(denom > 0, 2 * recall * precision / np.where(denom > 0, denom, 1.0), 0.0)


def f1_score(predictions: BoolLike, labels: BoolLike) -> Result[float, PsmError]:
    """F1 of binary predictions.

    Example:
        >>> f1_score([1, 0, 1, 0], [1, 1, 0, 0]).unwrap()
        0.5
    """
    p = np.asarray(predictions, dtype=bool).ravel()
    y = np.asarray(labels, dtype=bool).ravel()
    if p.size != y.size or p.size == 0:
        return fail(ErrorKind.LENGTH_MISMATCH, f"need equal non-zero lengths, got {p.size} and {y.size}")
    tp = float(np.sum(p & y))
    fp = float(np.sum(p & ~y))
    fn = float(np.sum(~p & y))
    return Ok(float(_f1_from_counts(np.array(tp), np.array(fp), np.array(fn))))


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class BootstrapF1:
    """Bootstrap distribution of F1 with its mean and 95% percentile interval."""

    values: npt.NDArray[np.float64]
    mean: float
    ci_low: float
    ci_high: float


def bootstrap_f1(
    predictions: BoolLike,
    labels: BoolLike,
    n: int = 100,
    seed: int = 0,
) -> Result[BootstrapF1, PsmError]:
    """Resample test frames with replacement and recompute F1.

    The same resample is applied to predictions and labels. Frames are resampled
    independently, which ignores temporal autocorrelation within a video.

    Args:
        predictions (array-like): Binary predictions
        labels (array-like): Binary ground truth
        n (int): Number of resamples
        seed (int): Resampling seed

    Returns:
        Result[BootstrapF1, PsmError]: ``n`` F1 values, their mean and the 2.5/97.5 percentiles
    """
    p = np.asarray(predictions, dtype=bool).ravel()
    y = np.asarray(labels, dtype=bool).ravel()
    if p.size != y.size or p.size < 2:
        return fail(ErrorKind.LENGTH_MISMATCH, f"need equal lengths >= 2, got {p.size} and {y.size}")
    if n < 1:
        return fail(ErrorKind.INVALID_PARAMS, "need at least one bootstrap resample", n=n)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, p.size, size=(n, p.size))
    ps, ys = p[idx], y[idx]
    values = _f1_from_counts(
        (ps & ys).sum(axis=1).astype(np.float64),
        (ps & ~ys).sum(axis=1).astype(np.float64),
        (~ps & ys).sum(axis=1).astype(np.float64),
    )
    low, high = np.percentile(values, [2.5, 97.5])
    return Ok(BootstrapF1(values, float(values.mean()), float(low), float(high)))


def compare_models(samples_a: npt.ArrayLike, samples_b: npt.ArrayLike) -> Result[float, PsmError]:
    """Two-sided Welch t-test p-value between two F1 samples.

    Two constant samples give 1.0 when equal and 0.0 otherwise.
    """
    a = np.asarray(samples_a, dtype=np.float64).ravel()
    b = np.asarray(samples_b, dtype=np.float64).ravel()
    if a.size < 2 or b.size < 2:
        return fail(ErrorKind.TOO_FEW_SAMPLES, f"need >= 2 samples per side, got {a.size} and {b.size}")
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        return Ok(1.0 if a[0] == b[0] else 0.0)
    return Ok(float(stats.ttest_ind(a, b, equal_var=False).pvalue))


@result
def compare_distributions(
    distributions_a: Mapping[K, npt.ArrayLike],
    distributions_b: Mapping[K, npt.ArrayLike],
) -> Result[dict[K, float], PsmError]:
    """Per-key Welch p-values over the keys both mappings share."""
    shared = sorted(set(distributions_a) & set(distributions_b))
    return Ok({key: question(compare_models(distributions_a[key], distributions_b[key])) for key in shared})
