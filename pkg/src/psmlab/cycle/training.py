import dataclasses
import json
import logging
from pathlib import Path

import numpy as np
import numpy.typing as npt
import torch

from psmlab.config import TrainConfig
from psmlab.cycle.bundle import ModelBundle
from psmlab.cycle.losses import LOSS_TERMS, LossBreakdown, decay_weight, loss_terms, total_loss
from psmlab.cycle.ops import check_images, to_tensor
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result, question, result

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class PairBatch:
    """Frame pairs ``(a[k], b[k])``; every pair belongs to one identity.

    Attributes:
        a (np.ndarray): ``N x H x W x C`` first frames
        b (np.ndarray): ``N x H x W x C`` second frames
        identities (tuple[str, ...]): Identity of each pair
    """

    a: npt.NDArray[np.float32]
    b: npt.NDArray[np.float32]
    identities: tuple[str, ...]

    def __len__(self) -> int:
        return int(self.a.shape[0])


@dataclasses.dataclass(slots=True, eq=False)
class OptimizerState:
    """Adam state bound to one bundle's parameters."""

    optimizer: torch.optim.Adam
    steps: int = 0

    @classmethod
    def create(cls, bundle: ModelBundle, config: TrainConfig) -> "OptimizerState":
        return cls(torch.optim.Adam(bundle.networks.parameters(), lr=config.lr, betas=config.betas))


def _dump(bundle: ModelBundle, batch: PairBatch, epoch: int, terms: dict[str, float], directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    bundle.save(directory / "bundle")
    np.savez_compressed(directory / "batch.npz", a=batch.a, b=batch.b)
    report = {
        "epoch": epoch,
        "terms": {k: repr(v) for k, v in terms.items()},
        "identities": list(batch.identities),
        "provenance": bundle.provenance.to_dict(),
        "non_finite_parameters": [n for n, p in bundle.named_tensors().items() if not bool(torch.isfinite(p).all())],
    }
    (directory / "nonfinite.json").write_text(json.dumps(report, indent=2), encoding="utf-8")
    logger.error("wrote non-finite loss diagnostics to %s", directory)


@result
def train_step(
    bundle: ModelBundle,
    batch: PairBatch,
    state: OptimizerState,
    epoch: int,
    config: TrainConfig,
) -> Result[tuple[ModelBundle, OptimizerState, LossBreakdown], PsmError]:
    """One gradient step on the total cycle loss.

    The bundle is updated in place and returned together with the optimizer state.
    With ``lr = 0`` the parameters stay bit-identical.

    Args:
        bundle (ModelBundle): Model being trained
        batch (PairBatch): Non-empty batch of same-identity pairs
        state (OptimizerState): Optimizer bound to ``bundle``
        epoch (int): Epoch used for the symmetric-loss decay
        config (TrainConfig): Decay and dump settings

    Returns:
        Result[tuple[ModelBundle, OptimizerState, LossBreakdown], PsmError]: Updated bundle and
        state with the loss terms before the update, or ``NonFiniteLoss``
    """
    assert len(batch) > 0, "empty training batch"
    assert len(set(batch.identities)) == 1, f"training batch mixes identities {sorted(set(batch.identities))}"
    question(check_images(bundle, batch.a))

    bundle.networks.train()
    weight = decay_weight(epoch, config.decay)
    terms = loss_terms(bundle.networks, to_tensor(batch.a), to_tensor(batch.b))
    loss = total_loss(terms, weight)
    values = {k: float(terms[k]) for k in LOSS_TERMS}
    if not torch.isfinite(loss):
        if config.dump_dir:
            _dump(bundle, batch, epoch, values, Path(config.dump_dir))
        return fail(ErrorKind.NON_FINITE_LOSS, f"non-finite loss at epoch {epoch}: {values}", epoch=epoch)

    state.optimizer.zero_grad(set_to_none=True)
    loss.backward()
    state.optimizer.step()
    state.steps += 1
    bundle.networks.eval()
    if not bundle.is_finite():
        if config.dump_dir:
            _dump(bundle, batch, epoch, values, Path(config.dump_dir))
        return fail(ErrorKind.NON_FINITE_LOSS, f"parameters became non-finite at epoch {epoch}", epoch=epoch)
    return Ok((bundle, state, LossBreakdown.compose(*values.values(), weight)))
