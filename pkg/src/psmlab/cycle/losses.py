import dataclasses

import numpy as np
import numpy.typing as npt
import torch

from psmlab.config import DecayConfig
from psmlab.cycle.bundle import ModelBundle
from psmlab.cycle.networks import CycleNetworks
from psmlab.cycle.ops import check_images, to_tensor
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result, question, result

LOSS_TERMS = ("reconstruction", "cycle_consistency", "neutral_symmetric")


@dataclasses.dataclass(frozen=True, slots=True)
class LossBreakdown:
    """Loss terms of one step.

    ``total = reconstruction + cycle_consistency + neutral_symmetric_weight * neutral_symmetric``
    """

    reconstruction: float
    cycle_consistency: float
    neutral_symmetric: float
    neutral_symmetric_weight: float
    total: float

    @classmethod
    def compose(
        cls,
        reconstruction: float,
        cycle_consistency: float,
        neutral_symmetric: float,
        weight: float,
    ) -> "LossBreakdown":
        return cls(
            reconstruction,
            cycle_consistency,
            neutral_symmetric,
            weight,
            reconstruction + cycle_consistency + weight * neutral_symmetric,
        )

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


def decay_weight(epoch: int, config: DecayConfig | None = None) -> float:
    """Weight of the neutral symmetric loss at ``epoch``, ``max(w_min, gamma ** epoch)``.

    Example:
        >>> decay_weight(0)
        1.0
    """
    config = config or DecayConfig()
    return max(config.w_min, config.gamma ** max(0, epoch))


def mirror(x: torch.Tensor) -> torch.Tensor:
    """Horizontal flip of an NCHW batch."""
    return torch.flip(x, dims=[-1])


def loss_terms(networks: CycleNetworks, a: torch.Tensor, b: torch.Tensor) -> dict[str, torch.Tensor]:
    """Differentiable loss terms of a batch of same-identity pairs ``(a, b)``.

    reconstruction
        L1 between ``R(N(b), E(a))`` and ``a``, symmetrized over the pair
    cycle_consistency
        L1 between the neutral faces generated from ``a`` and from ``b``
    neutral_symmetric
        L1 between each generated neutral face and its mirror image
    """
    code_a, code_b = networks.encode(a), networks.encode(b)
    neutral_a = networks.neutral(a, code_a)
    neutral_b = networks.neutral(b, code_b)
    rec_a = networks.retrieve(neutral_b, code_a)
    rec_b = networks.retrieve(neutral_a, code_b)
    return {
        "reconstruction": 0.5 * ((rec_a - a).abs().mean() + (rec_b - b).abs().mean()),
        "cycle_consistency": (neutral_a - neutral_b).abs().mean(),
        "neutral_symmetric": 0.5
        * ((neutral_a - mirror(neutral_a)).abs().mean() + (neutral_b - mirror(neutral_b)).abs().mean()),
    }


def total_loss(terms: dict[str, torch.Tensor], weight: float) -> torch.Tensor:
    return terms["reconstruction"] + terms["cycle_consistency"] + weight * terms["neutral_symmetric"]


@result
def compute_losses(
    bundle: ModelBundle,
    frame_a: npt.NDArray[np.floating],
    frame_b: npt.NDArray[np.floating],
    epoch: int,
    decay_config: DecayConfig | None = None,
) -> Result[LossBreakdown, PsmError]:
    """Evaluate the loss suite on one pair (or a batch of pairs) without updating the bundle.

    Both frames must show the same identity; that is the caller's contract.

    Returns:
        Result[LossBreakdown, PsmError]: The terms, or ``ShapeMismatch``
    """
    a, b = np.asarray(frame_a), np.asarray(frame_b)
    if a.shape != b.shape:
        return fail(ErrorKind.SHAPE_MISMATCH, f"paired frames differ in shape: {a.shape} vs {b.shape}")
    batch_a, batch_b = question(check_images(bundle, a)), b[None] if b.ndim == 3 else b
    bundle.networks.eval()
    with torch.no_grad():
        terms = loss_terms(bundle.networks, to_tensor(batch_a), to_tensor(batch_b))
    weight = decay_weight(epoch, decay_config)
    return Ok(LossBreakdown.compose(*(float(terms[k]) for k in LOSS_TERMS), weight))
