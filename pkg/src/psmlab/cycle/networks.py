"""Encoder and generators of the facial-motion cycle model.

All tensors are NCHW with pixels in [0, 1].
"""

import math

import torch
import torch.nn.functional as F  # noqa: N812
from torch import nn

from psmlab.config import ModelConfig

# keeps logit() finite on saturated pixels
PIXEL_EPS = 1e-4


def _down(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(nn.Conv2d(c_in, c_out, kernel_size=3, stride=2, padding=1), nn.ELU())


def _up(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Upsample(scale_factor=2, mode="nearest"),
        nn.Conv2d(c_in, c_out, kernel_size=3, padding=1),
        nn.ELU(),
    )


def bottleneck_side(config: ModelConfig) -> int:
    return config.image_size // 2 ** len(config.channels)


def code_gate(code: torch.Tensor) -> torch.Tensor:
    """Per-sample strength in [0, 1) of a motion code; exactly 0 for the zero code."""
    return torch.tanh(code.norm(dim=1) / math.sqrt(code.shape[1]))[:, None, None, None]


class MotionEncoder(nn.Module):
    """Image -> flat motion code."""

    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        widths = (config.in_channels, *config.channels)
        self.features = nn.Sequential(*(_down(a, b) for a, b in zip(widths[:-1], widths[1:], strict=True)))
        side = bottleneck_side(config)
        self.head = nn.Linear(config.channels[-1] * side * side, config.embedding_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x).flatten(1))


class ConditionalGenerator(nn.Module):
    """U-Net style generator conditioned on a motion code.

    The code is projected onto the bottleneck and added to the image features. The
    decoder output is either a residual on the input in logit space (``image``) or a
    bounded displacement field used to warp the input (``flow``).
    """

    def __init__(self, config: ModelConfig, *, output: str = "image", gated: bool = False) -> None:
        super().__init__()
        self.output = output
        self.gated = gated
        self.max_displacement = config.flow_max_displacement
        widths = (config.in_channels, *config.channels)
        self.down = nn.ModuleList(_down(a, b) for a, b in zip(widths[:-1], widths[1:], strict=True))
        self.side = bottleneck_side(config)
        self.condition = nn.Linear(config.embedding_dim, config.channels[-1] * self.side * self.side)
        ups: list[nn.Module] = []
        # each up stage sees its input concatenated with the matching down activation
        for level in range(len(config.channels) - 1, -1, -1):
            c_in = config.channels[level] * 2
            c_out = config.channels[level - 1] if level > 0 else config.channels[0]
            ups.append(_up(c_in, c_out))
        self.up = nn.ModuleList(ups)
        out_channels = 2 if output == "flow" else config.in_channels
        self.out = nn.Conv2d(config.channels[0] + config.in_channels, out_channels, kernel_size=3, padding=1)

    def decode(self, x: torch.Tensor, code: torch.Tensor) -> torch.Tensor:
        skips = []
        h = x
        for stage in self.down:
            h = stage(h)
            skips.append(h)
        h = h + self.condition(code).view(h.shape)
        for stage, skip in zip(self.up, reversed(skips), strict=True):
            h = stage(torch.cat([h, skip], dim=1))
        return self.out(torch.cat([h, x], dim=1))

    def forward(self, x: torch.Tensor, code: torch.Tensor) -> torch.Tensor:
        delta = self.decode(x, code)
        gate = code_gate(code) if self.gated else 1.0
        if self.output == "flow":
            flow = self.max_displacement * torch.tanh(delta) * gate
            return warp(x, flow)
        logits = torch.logit(x.clamp(PIXEL_EPS, 1.0 - PIXEL_EPS))
        return torch.sigmoid(logits + gate * delta)


def warp(x: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
    """Bilinear backward warp of ``x`` by a ``N x 2 x H x W`` displacement in normalized coordinates."""
    n, _, h, w = x.shape
    ys = torch.linspace(-1.0, 1.0, h, dtype=x.dtype, device=x.device)
    xs = torch.linspace(-1.0, 1.0, w, dtype=x.dtype, device=x.device)
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    base = torch.stack([gx, gy], dim=-1).expand(n, h, w, 2)
    grid = base + flow.permute(0, 2, 3, 1)
    return F.grid_sample(x, grid, mode="bilinear", padding_mode="border", align_corners=True)


class CycleNetworks(nn.Module):
    """Encoder E, neutral generator N and retrieval generator R.

    ``N(x, E(x))`` removes the expression of ``x``; ``R(n, c)`` puts the motion ``c``
    back onto a neutral face ``n``; the zero code leaves ``n`` unchanged.
    """

    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.encoder = MotionEncoder(config)
        self.neutral = ConditionalGenerator(config, output="image")
        retrieval_output = "flow" if config.retrieval_mode == "flow" else "image"
        self.retrieval = ConditionalGenerator(config, output=retrieval_output, gated=True)

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.encoder(x)

    def remove(self, x: torch.Tensor, code: torch.Tensor | None = None) -> torch.Tensor:
        return self.neutral(x, self.encoder(x) if code is None else code)

    def retrieve(self, neutral: torch.Tensor, code: torch.Tensor) -> torch.Tensor:
        return self.retrieval(neutral, code)
