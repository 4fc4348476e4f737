import dataclasses
import logging

import numpy as np
import numpy.typing as npt
import torch
from torch import nn

from psmlab.config import ProbeConfig
from psmlab.data_ingest.au import AU_NUMBERS, au_label
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result

logger = logging.getLogger(__name__)

MIN_PROBE_SAMPLES = 10


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class ProbeModel:
    """Frozen normalization followed by a bias-free linear layer, one output per fitted AU.

    Attributes:
        mean (np.ndarray): Per-dimension mean of the training embeddings
        var (np.ndarray): Per-dimension variance, floored at ``ProbeConfig.var_floor``
        weights (np.ndarray): ``embedding_dim x len(aus)``
        aus (tuple[int, ...]): AU numbers of the output columns
        skipped (dict[int, str]): AUs that could not be fitted and why
    """

    mean: npt.NDArray[np.float64]
    var: npt.NDArray[np.float64]
    weights: npt.NDArray[np.float32]
    aus: tuple[int, ...]
    skipped: dict[int, str]

    def _layers(self) -> nn.Sequential:
        dim = self.mean.shape[0]
        norm = nn.BatchNorm1d(dim, affine=False, eps=0.0)
        linear = nn.Linear(dim, len(self.aus), bias=False)
        with torch.no_grad():
            norm.running_mean.copy_(torch.from_numpy(self.mean))
            norm.running_var.copy_(torch.from_numpy(self.var))
            linear.weight.copy_(torch.from_numpy(self.weights.T.copy()))
        return nn.Sequential(norm, linear).eval()

    def decision(self, embeddings: npt.NDArray[np.floating]) -> npt.NDArray[np.float32]:
        """Logits, ``N x len(aus)``."""
        with torch.no_grad():
            return self._layers()(torch.from_numpy(np.asarray(embeddings, dtype=np.float32))).numpy()

    def predict_proba(self, embeddings: npt.NDArray[np.floating]) -> npt.NDArray[np.float32]:
        return 1.0 / (1.0 + np.exp(-self.decision(embeddings)))

    def predict(self, embeddings: npt.NDArray[np.floating], threshold: float = 0.5) -> npt.NDArray[np.bool_]:
        return self.predict_proba(embeddings) > threshold


def fit_probe(
    embeddings: npt.NDArray[np.floating],
    labels: npt.NDArray[np.bool_],
    config: ProbeConfig | None = None,
    aus: tuple[int, ...] = AU_NUMBERS,
) -> Result[ProbeModel, PsmError]:
    """Fit the linear probe with binary cross-entropy on frozen embeddings.

    Normalization statistics come from ``embeddings`` only and never change afterwards.
    Columns with a single class are skipped and recorded.

    Args:
        embeddings (np.ndarray): ``N x D`` training embeddings
        labels (np.ndarray): ``N x len(aus)`` binary labels
        config (ProbeConfig | None): Epochs, learning rate, seed and variance floor
        aus (tuple[int, ...]): AU numbers of the label columns

    Returns:
        Result[ProbeModel, PsmError]: The probe, or ``LengthMismatch``/``TooFewSamples``, or
        ``DegenerateLabels`` when no column has both classes
    """
    config = config or ProbeConfig()
    x = np.asarray(embeddings, dtype=np.float32)
    y = np.asarray(labels, dtype=bool)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0] or y.shape[1] != len(aus):
        return fail(ErrorKind.LENGTH_MISMATCH, f"embeddings {x.shape} do not match labels {y.shape}")
    if x.shape[0] < MIN_PROBE_SAMPLES:
        return fail(ErrorKind.TOO_FEW_SAMPLES, f"need at least {MIN_PROBE_SAMPLES} samples", count=x.shape[0])

    positives = y.sum(axis=0)
    usable = (positives > 0) & (positives < y.shape[0])
    skipped = {au: "single class in training labels" for au, ok in zip(aus, usable, strict=True) if not ok}
    for au in skipped:
        logger.warning("%s: %s, skipped", au_label(au), skipped[au])
    if not usable.any():
        return fail(ErrorKind.DEGENERATE_LABELS, "every AU column has a single class", aus=list(aus))
    fitted = tuple(au for au, ok in zip(aus, usable, strict=True) if ok)

    mean = x.astype(np.float64).mean(axis=0)
    var = np.maximum(x.astype(np.float64).var(axis=0), config.var_floor)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        linear = nn.Linear(x.shape[1], len(fitted), bias=False)
    inputs = torch.from_numpy(((x - mean) / np.sqrt(var)).astype(np.float32))
    targets = torch.from_numpy(y[:, usable].astype(np.float32))
    optimizer = torch.optim.Adam(linear.parameters(), lr=config.lr)
    criterion = nn.BCEWithLogitsLoss()
    for _ in range(config.epochs):
        optimizer.zero_grad(set_to_none=True)
        loss = criterion(linear(inputs), targets)
        loss.backward()
        optimizer.step()
    final = float(loss) if config.epochs else float("nan")
    logger.debug("probe fitted on %d samples, final BCE %.4f", x.shape[0], final)
    weights = linear.weight.detach().numpy().T.astype(np.float32)
    return Ok(ProbeModel(mean, var, weights, fitted, skipped))
