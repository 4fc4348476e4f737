"""Finite-difference check of the analytic loss gradients on a miniature model."""

import dataclasses
import logging

import numpy as np
import torch

from psmlab.config import ModelConfig
from psmlab.cycle.bundle import validate_model_config
from psmlab.cycle.losses import LOSS_TERMS, loss_terms
from psmlab.cycle.networks import CycleNetworks
from psmlab.errors import PsmError
from psmlab.outcome import Ok, Result, question, result

logger = logging.getLogger(__name__)

MINIATURE = ModelConfig(image_size=8, in_channels=3, embedding_dim=4, channels=(2, 2))
# relative error denominators never drop below this
GRAD_FLOOR = 1e-6


@dataclasses.dataclass(frozen=True, slots=True)
class GradientReport:
    """Worst relative error per loss term over the checked coordinates."""

    max_relative_error: dict[str, float]
    coordinates: int

    def passes(self, tolerance: float = 1e-4) -> bool:
        return all(v <= tolerance for v in self.max_relative_error.values())


@result
def gradient_check(
    config: ModelConfig = MINIATURE,
    *,
    coordinates: int = 100,
    eps: float = 1e-6,
    batch: int = 2,
    seed: int = 0,
) -> Result[GradientReport, PsmError]:
    """Compare autograd gradients with central differences, in float64.

    Args:
        config (ModelConfig): Model to check; keep it tiny
        coordinates (int): Random parameter coordinates per loss term
        eps (float): Central-difference step
        batch (int): Number of random image pairs
        seed (int): Seed of weights, images and coordinates

    Returns:
        Result[GradientReport, PsmError]: Per-term worst relative error
    """
    question(validate_model_config(config))
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        networks = CycleNetworks(config).double()
    rng = np.random.default_rng(seed)
    shape = (batch, config.in_channels, config.image_size, config.image_size)
    a = torch.from_numpy(rng.uniform(0.05, 0.95, shape))
    b = torch.from_numpy(rng.uniform(0.05, 0.95, shape))
    params = list(networks.parameters())
    sizes = np.array([p.numel() for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    worst: dict[str, float] = {}
    for term in LOSS_TERMS:
        networks.zero_grad(set_to_none=True)
        loss_terms(networks, a, b)[term].backward()
        flat_grad = torch.cat(
            [torch.zeros(p.numel(), dtype=torch.float64) if p.grad is None else p.grad.reshape(-1) for p in params],
        )
        picks = rng.choice(int(offsets[-1]), size=min(coordinates, int(offsets[-1])), replace=False)
        errors = []
        with torch.no_grad():
            for flat in picks:
                k = int(np.searchsorted(offsets, flat, side="right") - 1)
                view = params[k].view(-1)
                i = int(flat - offsets[k])
                original = float(view[i])
                view[i] = original + eps
                plus = float(loss_terms(networks, a, b)[term])
                view[i] = original - eps
                minus = float(loss_terms(networks, a, b)[term])
                view[i] = original
                numeric = (plus - minus) / (2 * eps)
                analytic = float(flat_grad[flat])
                errors.append(abs(analytic - numeric) / max(abs(analytic), abs(numeric), GRAD_FLOOR))
        worst[term] = float(max(errors))
        logger.info("gradient check %s: max relative error %.3e", term, worst[term])
    return Ok(GradientReport(worst, coordinates))
