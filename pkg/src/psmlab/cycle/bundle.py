"""Model bundles: the three networks, their config and where they came from."""

import copy
import dataclasses
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Self

import numpy as np
import torch

from psmlab.config import ModelConfig, build_dataclass
from psmlab.cycle.networks import CycleNetworks
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result, question, result

logger = logging.getLogger(__name__)

BUNDLE_FORMAT = "psmlab-bundle/1"
MANIFEST = "bundle.json"
BLOB_SUFFIX = ".f32"


@dataclasses.dataclass(frozen=True, slots=True)
class Provenance:
    """How a bundle was trained.

    Attributes:
        regime (str): ``untrained``, ``psm``, ``gm``, ``transfer``, ``curriculum`` or ``scratch``
        identities (tuple[str, ...]): Subjects whose frames were used
        epochs_trained (int): Epochs of this bundle's own training, excluding ``parent``
        seed (int): Seed of initialization and sampling
        frames_used (int): Training frames per subject (summed for several subjects)
        parent (Provenance | None): The pretrained bundle a transfer started from
    """

    regime: str = "untrained"
    identities: tuple[str, ...] = ()
    epochs_trained: int = 0
    seed: int = 0
    frames_used: int = 0
    parent: "Provenance | None" = None

    @property
    def total_epochs(self) -> int:
        """Epochs including every pretraining stage."""
        return self.epochs_trained + (self.parent.total_epochs if self.parent else 0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "regime": self.regime,
            "identities": list(self.identities),
            "epochs_trained": self.epochs_trained,
            "seed": self.seed,
            "frames_used": self.frames_used,
            "parent": self.parent.to_dict() if self.parent else None,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> Self:
        parent = raw.get("parent")
        return cls(
            regime=str(raw["regime"]),
            identities=tuple(raw.get("identities", ())),
            epochs_trained=int(raw.get("epochs_trained", 0)),
            seed=int(raw.get("seed", 0)),
            frames_used=int(raw.get("frames_used", 0)),
            parent=cls.from_dict(parent) if parent else None,
        )


def validate_model_config(config: ModelConfig) -> Result[ModelConfig, PsmError]:
    if not config.channels or any(c < 1 for c in config.channels):
        return fail(ErrorKind.INVALID_CONFIG, "model channels must be a non-empty list of positive widths")
    if config.image_size % 2 ** len(config.channels) or config.image_size < 2 ** len(config.channels):
        return fail(
            ErrorKind.INVALID_CONFIG,
            f"image_size {config.image_size} must be a multiple of 2**{len(config.channels)}",
            image_size=config.image_size,
        )
    if config.embedding_dim < 1 or config.in_channels not in (1, 3):
        return fail(ErrorKind.INVALID_CONFIG, "embedding_dim must be >= 1 and in_channels 1 or 3")
    if config.retrieval_mode not in ("direct", "flow"):
        return fail(ErrorKind.INVALID_CONFIG, f"unknown retrieval_mode {config.retrieval_mode!r}")
    return Ok(config)


@dataclasses.dataclass(slots=True, eq=False)
class ModelBundle:
    """Encoder, neutral generator and retrieval generator with config and provenance.

    Parameters are owned by one training loop at a time; inference only reads them.
    """

    config: ModelConfig
    networks: CycleNetworks
    provenance: Provenance

    @classmethod
    @result
    def create(cls, config: ModelConfig, seed: int = 0) -> Result[Self, PsmError]:
        """Freshly initialized bundle, deterministic under ``seed``."""
        question(validate_model_config(config))
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            networks = CycleNetworks(config)
        networks.eval()
        return Ok(cls(config, networks, Provenance(seed=seed)))

    def clone(self) -> "ModelBundle":
        return ModelBundle(self.config, copy.deepcopy(self.networks), self.provenance)

    def named_tensors(self) -> dict[str, torch.Tensor]:
        """Parameters keyed ``encoder.*``, ``neutral.*`` and ``retrieval.*``."""
        return {name: p.detach() for name, p in self.networks.named_parameters()}

    def is_finite(self) -> bool:
        return all(bool(torch.isfinite(p).all()) for p in self.networks.parameters())

    def digest(self) -> str:
        """SHA-256 over config and parameter bytes."""
        h = hashlib.sha256(json.dumps(dataclasses.asdict(self.config), sort_keys=True).encode())
        for name, tensor in sorted(self.named_tensors().items()):
            h.update(name.encode())
            h.update(tensor.cpu().numpy().astype("<f4").tobytes())
        return h.hexdigest()

    def same_parameters(self, other: "ModelBundle") -> bool:
        mine, theirs = self.named_tensors(), other.named_tensors()
        return mine.keys() == theirs.keys() and all(torch.equal(mine[k], theirs[k]) for k in mine)

    def save(self, directory: Path) -> Result[Path, PsmError]:
        """Write ``bundle.json`` plus one little-endian float32 blob per named parameter."""
        tensors = []
        try:
            directory.mkdir(parents=True, exist_ok=True)
            for name, tensor in self.named_tensors().items():
                file = f"{name}{BLOB_SUFFIX}"
                tensor.cpu().numpy().astype("<f4").tofile(directory / file)
                tensors.append({"name": name, "shape": list(tensor.shape), "file": file})
            manifest = {
                "format": BUNDLE_FORMAT,
                "config": dataclasses.asdict(self.config),
                "provenance": self.provenance.to_dict(),
                "tensors": tensors,
            }
            (directory / MANIFEST).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
        except OSError as e:
            return fail(ErrorKind.IO_FAILURE, f"cannot write bundle to {directory}: {e}")
        provenance = self.provenance
        logger.info("saved bundle (%s, %d epochs) to %s", provenance.regime, provenance.total_epochs, directory)
        return Ok(directory)

    @classmethod
    @result
    def load(cls, directory: Path) -> Result["ModelBundle", PsmError]:
        try:
            manifest = json.loads((directory / MANIFEST).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            return fail(ErrorKind.IO_FAILURE, f"cannot read bundle manifest in {directory}: {e}")
        if manifest.get("format") != BUNDLE_FORMAT:
            return fail(ErrorKind.SCHEMA_MISMATCH, f"unsupported bundle format {manifest.get('format')!r}")
        config = question(build_dataclass(ModelConfig, manifest["config"], "bundle.config"))
        bundle = question(ModelBundle.create(config))
        params = dict(bundle.networks.named_parameters())
        stored = {t["name"]: t for t in manifest["tensors"]}
        if stored.keys() != params.keys():
            return fail(ErrorKind.SCHEMA_MISMATCH, f"bundle in {directory} does not match its config's parameters")
        with torch.no_grad():
            for name, entry in stored.items():
                try:
                    blob = np.fromfile(directory / entry["file"], dtype="<f4")
                except OSError as e:
                    return fail(ErrorKind.IO_FAILURE, f"cannot read {entry['file']}: {e}")
                if blob.size != params[name].numel():
                    return fail(ErrorKind.SCHEMA_MISMATCH, f"blob {entry['file']} has {blob.size} values")
                params[name].copy_(torch.from_numpy(blob.astype(np.float32)).view(params[name].shape))
        bundle.provenance = Provenance.from_dict(manifest["provenance"])
        return Ok(bundle)
