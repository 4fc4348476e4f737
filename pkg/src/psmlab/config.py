"""Typed configuration for every psmlab stage.

One frozen dataclass per concern, aggregated by ``PsmLabConfig`` and loaded from a
single YAML file. Missing keys take the defaults below; unknown keys are an
``InvalidConfig`` error.
"""

import dataclasses
import logging
import os
import types
import typing
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Literal, Self, TypeVar, cast

import yaml

from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Ok, Result, collect, question, result

logger = logging.getLogger(__name__)

C = TypeVar("C")

RegimeName = Literal["psm", "gm", "transfer_from_gm", "transfer_from_psm", "scratch_short"]
RetrievalMode = Literal["direct", "flow"]
CurriculumShape = Literal["linear", "staircase"]

CACHE_ENV = "PSMLAB_CACHE"


def cache_dir() -> Path:
    """Embedding cache directory, ``$PSMLAB_CACHE`` or ``~/.cache/psmlab``."""
    return Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "psmlab"))


@dataclasses.dataclass(frozen=True, slots=True)
class SynthConfig:
    """Desk-scale synthetic dataset.

    Attributes:
        subjects (int): Number of identities
        frames_per_subject (int): Video length per identity
        image_size (int): Side of the rendered (unaligned) frames
        motion_factor_count (int): How many latent motion factors are animated
        person_specific_patterns (bool): Give every identity its own factor couplings and signature movement
        head_motion (bool): Add in-plane head roll and translation that alignment must undo
        seed (int): Master seed
        fps (int): Nominal frame rate written to the metadata
    """

    subjects: int = 3
    frames_per_subject: int = 500
    image_size: int = 48
    motion_factor_count: int = 8
    person_specific_patterns: bool = True
    head_motion: bool = True
    seed: int = 0
    fps: int = 20


@dataclasses.dataclass(frozen=True, slots=True)
class AlignConfig:
    out_size: int = 32
    eye_height: float = 0.40
    interocular: float = 0.38
    grayscale: bool = False


@dataclasses.dataclass(frozen=True, slots=True)
class ModelConfig:
    """Cycle model architecture.

    Attributes:
        image_size (int): Side of the aligned frames; must be divisible by ``2 ** len(channels)``
        in_channels (int): 3 for RGB, 1 for grayscale
        embedding_dim (int): Length of the motion embedding
        channels (tuple[int, ...]): Widths of the downsampling stages, shared by encoder and generators
        retrieval_mode (RetrievalMode): ``direct`` generation or ``flow`` warping of the neutral face
        flow_max_displacement (float): Bound on the flow field, in normalized image coordinates
    """

    image_size: int = 32
    in_channels: int = 3
    embedding_dim: int = 256
    channels: tuple[int, ...] = (16, 32, 64)
    retrieval_mode: RetrievalMode = "direct"
    flow_max_displacement: float = 0.25


@dataclasses.dataclass(frozen=True, slots=True)
class DecayConfig:
    """Weight of the neutral symmetric loss, ``max(w_min, gamma ** epoch)``."""

    gamma: float = 0.98
    w_min: float = 0.05


@dataclasses.dataclass(frozen=True, slots=True)
class TrainConfig:
    lr: float = 2e-4
    batch_size: int = 16
    pairs_per_epoch: int | None = None
    betas: tuple[float, float] = (0.9, 0.999)
    num_threads: int | None = None
    decay: DecayConfig = DecayConfig()
    dump_dir: str | None = None


@dataclasses.dataclass(frozen=True, slots=True)
class CurriculumConfig:
    """Schedule of the maximum temporal distance between paired frames."""

    d_min: int = 1
    d_max: int = 101
    ramp_epochs: int = 100
    shape: CurriculumShape = "linear"
    steps: int = 4

    @classmethod
    def parse(cls, text: str) -> Result[Self, PsmError]:
        """Parse the command-line form ``linear:dmin,dmax,ramp`` (or ``staircase:...``).

        Example:
            >>> CurriculumConfig.parse("linear:1,101,100").unwrap()
            CurriculumConfig(d_min=1, d_max=101, ramp_epochs=100, shape='linear', steps=4)
        """
        shape, _, numbers = text.partition(":")
        parts = [p for p in numbers.split(",") if p.strip()]
        if shape not in ("linear", "staircase") or len(parts) not in (3, 4):
            return fail(ErrorKind.INVALID_CONFIG, f"curriculum must look like linear:dmin,dmax,ramp, got {text!r}")
        try:
            values = [int(p) for p in parts]
        except ValueError:
            return fail(ErrorKind.INVALID_CONFIG, f"curriculum values must be integers, got {text!r}")
        config = cls(d_min=values[0], d_max=values[1], ramp_epochs=values[2], shape=cast("CurriculumShape", shape))
        if len(values) == 4:
            config = dataclasses.replace(config, steps=values[3])
        return config.validate()

    def validate(self) -> Result[Self, PsmError]:
        if self.d_min < 1 or self.d_max < self.d_min:
            message = "curriculum needs 1 <= d_min <= d_max"
            return fail(ErrorKind.INVALID_CONFIG, message, d_min=self.d_min, d_max=self.d_max)
        if self.ramp_epochs < 0 or self.steps < 1:
            return fail(ErrorKind.INVALID_CONFIG, "curriculum needs ramp_epochs >= 0 and steps >= 1")
        return Ok(self)


@dataclasses.dataclass(frozen=True, slots=True)
class RegimeConfig:
    """How a bundle is trained.

    Full-scale pairs are (psm, 500), (transfer_*, 10) and (scratch_short, 10); the short
    regimes use ``frame_fraction=0.1``.
    """

    regime: RegimeName = "psm"
    epochs: int = 500
    frame_fraction: float = 1.0
    seed: int = 0
    curriculum: CurriculumConfig | None = None

    def validate(self) -> Result[Self, PsmError]:
        if self.epochs < 0:
            return fail(ErrorKind.INVALID_CONFIG, "epochs must be >= 0", epochs=self.epochs)
        if not 0.0 < self.frame_fraction <= 1.0:
            message = "frame_fraction must lie in (0, 1]"
            return fail(ErrorKind.INVALID_CONFIG, message, frame_fraction=self.frame_fraction)
        if self.curriculum is not None:
            return self.curriculum.validate().map(lambda _: self)
        return Ok(self)


@dataclasses.dataclass(frozen=True, slots=True)
class ProbeConfig:
    """Linear probe protocol.

    Attributes:
        epochs (int): Full-batch gradient steps
        lr (float): Adam learning rate
        threshold (float): Decision threshold on the sigmoid output
        n_bootstrap (int): Bootstrap resamples of each test set
        min_activity (float): Person-dependent filter, AUs active less often are not evaluated
        train_fraction (float): Person-dependent train share
        folds (int): Person-independent identity folds
        aus (tuple[int, ...] | None): Restrict evaluation to these AU numbers
        var_floor (float): Floor on the normalization variance
    """

    epochs: int = 300
    lr: float = 1e-2
    seed: int = 0
    threshold: float = 0.5
    n_bootstrap: int = 100
    min_activity: float = 0.02
    train_fraction: float = 0.8
    folds: int = 3
    aus: tuple[int, ...] | None = None
    var_floor: float = 1e-5


@dataclasses.dataclass(frozen=True, slots=True)
class ClusterConfig:
    """DBSCAN sweep and novelty analysis.

    ``profile_eps``/``profile_min_samples`` fix the setting used for cluster profiles; when
    unset, the grid setting whose cluster count is closest to the sweep average is used.
    """

    eps_values: tuple[float, ...] = (3, 4, 5, 6, 7, 8, 9, 10)
    min_samples_values: tuple[int, ...] = (4, 5, 6, 7, 8)
    threshold: float = 0.8
    distance: Literal["l1", "l2"] = "l1"
    space: Literal["raw", "pca"] = "raw"
    pca_components: int = 32
    profile_eps: float | None = None
    profile_min_samples: int | None = None


@dataclasses.dataclass(frozen=True, slots=True)
class PsmLabConfig:
    synth: SynthConfig = SynthConfig()
    align: AlignConfig = AlignConfig()
    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    regime: RegimeConfig = RegimeConfig()
    probe: ProbeConfig = ProbeConfig()
    cluster: ClusterConfig = ClusterConfig()

    def with_overrides(self, section: str, **values: Any) -> Self:
        """Replace fields of one section, ignoring ``None`` values (unset CLI flags)."""
        updates = {k: v for k, v in values.items() if v is not None}
        if not updates:
            return self
        current = getattr(self, section)
        return dataclasses.replace(self, **{section: dataclasses.replace(current, **updates)})

    def snapshot(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def load_config(path: Path | None) -> Result[PsmLabConfig, PsmError]:
    """Load a YAML configuration file; ``None`` gives the defaults.

    Args:
        path (Path | None): YAML file with optional sections ``synth``, ``align``, ``model``,
            ``train``, ``regime``, ``probe`` and ``cluster``

    Returns:
        Result[PsmLabConfig, PsmError]: The configuration, or ``InvalidConfig``/``IoFailure``
    """
    if path is None:
        return Ok(PsmLabConfig())
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except OSError as e:
        return fail(ErrorKind.IO_FAILURE, f"cannot read config {path}: {e}")
    except yaml.YAMLError as e:
        return fail(ErrorKind.INVALID_CONFIG, f"config {path} is not valid YAML: {e}")
    if not isinstance(raw, Mapping):
        return fail(ErrorKind.INVALID_CONFIG, f"config {path} must be a mapping of sections")
    return build_dataclass(PsmLabConfig, raw, "config")


@result
def build_dataclass(cls: type[C], raw: Mapping[str, Any], where: str) -> Result[C, PsmError]:
    """Construct a (nested) config dataclass from plain YAML data."""
    names = {f.name: f for f in dataclasses.fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(raw) - set(names))
    if unknown:
        return fail(ErrorKind.INVALID_CONFIG, f"unknown keys in {where}: {', '.join(unknown)}", keys=unknown)
    hints = typing.get_type_hints(cls)
    values = question(collect(_convert(hints[key], value, f"{where}.{key}") for key, value in raw.items()))
    try:
        return Ok(cls(**dict(zip(raw, values, strict=True))))
    except TypeError as e:
        return fail(ErrorKind.INVALID_CONFIG, f"bad values in {where}: {e}")


def _convert(hint: Any, value: Any, where: str) -> Result[Any, PsmError]:
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return Ok(None)
        inner = [a for a in args if a is not type(None)]
        if len(inner) == 1 and inner[0] is CurriculumConfig and isinstance(value, str):
            return CurriculumConfig.parse(value)
        return _convert(inner[0], value, where)
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, Mapping):
            return fail(ErrorKind.INVALID_CONFIG, f"{where} must be a mapping")
        return build_dataclass(hint, value, where)  # type: ignore[arg-type]
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            return fail(ErrorKind.INVALID_CONFIG, f"{where} must be a list")
        return Ok(tuple(value))
    if origin is Literal:
        if value not in args:
            return fail(ErrorKind.INVALID_CONFIG, f"{where} must be one of {args}, got {value!r}")
        return Ok(value)
    if hint is float and isinstance(value, int) and not isinstance(value, bool):
        return Ok(float(value))
    if hint in (int, float, bool, str) and not isinstance(value, hint):
        return fail(ErrorKind.INVALID_CONFIG, f"{where} must be {hint.__name__}, got {value!r}")
    return Ok(value)
