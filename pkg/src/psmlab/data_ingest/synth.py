"""Desk-scale synthetic stand-in for DISFA.

Toy faces are rendered from a small set of latent motion factors. Each factor
animates a facial region (brows, lids, mouth corners, lips, nose) and the AU
labels are thresholds of those factors, so the label of every frame is known
exactly. Identities differ in shape, colours and, optionally, in how their
factors couple (a smile that also raises the brows) plus a signature movement
that only they perform.
"""

import dataclasses
import logging
from collections.abc import Mapping
from types import MappingProxyType

import numpy as np
import numpy.typing as npt
from PIL import Image, ImageDraw, ImageFilter
from scipy.ndimage import gaussian_filter1d

from psmlab.config import SynthConfig
from psmlab.data_ingest.au import AU_NUMBERS, N_AUS, AURecord
from psmlab.data_ingest.dataset import Dataset, DatasetMetadata, FrameRef, LandmarkStatus
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.outcome import Result

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

FACTORS: tuple[str, ...] = (
    "brow_raise",
    "brow_lower",
    "eye_open",
    "smile",
    "mouth_open",
    "frown",
    "nose_wrinkle",
    "lip_stretch",
)
# AU number -> (driving factor, activation threshold)
AU_RULES: Mapping[int, tuple[str, float]] = MappingProxyType(
    {
        1: ("brow_raise", 0.50),
        2: ("brow_raise", 0.65),
        4: ("brow_lower", 0.50),
        5: ("eye_open", 0.60),
        6: ("smile", 0.65),
        9: ("nose_wrinkle", 0.55),
        12: ("smile", 0.50),
        15: ("frown", 0.50),
        17: ("frown", 0.70),
        20: ("lip_stretch", 0.55),
        25: ("mouth_open", 0.50),
        26: ("mouth_open", 0.45),
    },
)
MIN_IMAGE_SIZE = 8
SUPERSAMPLE = 4
# unit face coordinates -> pixels, as a fraction of the image side
FACE_SCALE = 0.36
FRAMES_PER_EVENT = 120


def _f(name: str) -> int:
    return FACTORS.index(name)


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class SubjectStyle:
    """Identity of a synthetic subject: geometry, colours and motion couplings.

    Attributes:
        face_width (float): Half width of the head ellipse in unit face coordinates
        face_height (float): Half height of the head ellipse
        eye_spacing (float): Extra horizontal offset of both eyes
        brow_thickness (float): Brow stroke width in unit coordinates
        mouth_width (float): Relative mouth width
        skin, hair, background, lips (tuple[int, int, int]): RGB colours
        gains (np.ndarray): Per-factor expressiveness
        mixing (np.ndarray): Factor coupling matrix, identity when not person specific
        signature (tuple[int, ...]): Factors this subject co-activates in its own movement
    """

    face_width: float
    face_height: float
    eye_spacing: float
    brow_thickness: float
    mouth_width: float
    skin: tuple[int, int, int]
    hair: tuple[int, int, int]
    background: tuple[int, int, int]
    lips: tuple[int, int, int]
    gains: FloatArray
    mixing: FloatArray
    signature: tuple[int, ...] = ()

    def expressed(self, factors: FloatArray) -> FloatArray:
        """Rendered deformation amplitudes of a factor vector."""
        return np.clip(self.gains * (self.mixing @ factors), 0.0, 1.3)


@dataclasses.dataclass(frozen=True, slots=True)
class Pose:
    """In-plane head pose; dx and dy are fractions of the image side."""

    roll_deg: float = 0.0
    dx: float = 0.0
    dy: float = 0.0
    scale: float = 1.0


def _color(rng: np.random.Generator, low: list[float], high: list[float]) -> tuple[int, int, int]:
    c = rng.uniform(low, high)
    return (int(c[0]), int(c[1]), int(c[2]))


def sample_style(rng: np.random.Generator, *, person_specific: bool, active: int) -> SubjectStyle:
    n = len(FACTORS)
    skin = _color(rng, [150, 110, 90], [240, 200, 170])
    gains = np.ones(n)
    mixing = np.eye(n)
    signature: tuple[int, ...] = ()
    if person_specific:
        gains = rng.uniform(0.75, 1.25, n)
        for _ in range(2):
            src, dst = rng.choice(active, size=2, replace=False) if active >= 2 else (0, 0)
            if src != dst:
                mixing[dst, src] = rng.uniform(0.2, 0.4)
        size = min(active, int(rng.integers(2, 4)))
        signature = tuple(sorted(int(i) for i in rng.choice(active, size=size, replace=False)))
    return SubjectStyle(
        face_width=float(rng.uniform(0.78, 0.92)),
        face_height=float(rng.uniform(0.95, 1.05)),
        eye_spacing=float(rng.uniform(-0.03, 0.03)),
        brow_thickness=float(rng.uniform(0.05, 0.09)),
        mouth_width=float(rng.uniform(0.9, 1.1)),
        skin=skin,
        hair=_color(rng, [20, 15, 10], [120, 100, 80]),
        background=_color(rng, [60, 60, 60], [200, 200, 200]),
        lips=(int(skin[0] * 0.8), int(skin[1] * 0.45), int(skin[2] * 0.5)),
        gains=gains,
        mixing=mixing,
        signature=signature,
    )


def face_landmarks(style: SubjectStyle, m: FloatArray) -> FloatArray:
    """68 landmarks (iBUG order) in unit face coordinates, y pointing down."""
    brow_raise, brow_lower, eye_open, smile, mouth_open, frown, wrinkle, stretch = (float(v) for v in m)
    pts = np.zeros((68, 2))
    # jaw 0-16 along the lower half of the head ellipse
    theta = np.linspace(np.pi, 0.0, 17)
    b_low = style.face_height + 0.08 * mouth_open
    pts[0:17, 0] = style.face_width * np.cos(theta)
    pts[0:17, 1] = -0.05 + b_low * np.sin(theta)
    # brows: 17-21 outer->inner on the image left, 22-26 inner->outer on the image right
    xs = np.linspace(-0.72, -0.16, 5) - style.eye_spacing
    inner_weight = np.linspace(0.6, 1.0, 5)
    arch = -0.05 * np.sin(np.linspace(0.2, np.pi - 0.2, 5))
    ys = -0.47 + arch - 0.16 * brow_raise * (1.2 - 0.4 * inner_weight) + 0.12 * brow_lower * inner_weight
    xs_shift = xs + 0.05 * brow_lower * inner_weight
    pts[17:22, 0], pts[17:22, 1] = xs_shift, ys
    pts[22:27, 0], pts[22:27, 1] = -xs_shift[::-1], ys[::-1]
    # nose bridge 27-30 and nostrils 31-35
    pts[27:31, 0] = 0.0
    pts[27:31, 1] = np.linspace(-0.28, 0.12, 4)
    pts[31:36, 0] = np.array([-0.14, -0.07, 0.0, 0.07, 0.14]) * (1.0 + 0.2 * wrinkle)
    pts[31:36, 1] = 0.2 + np.array([0.0, 0.03, 0.04, 0.03, 0.0]) - 0.05 * wrinkle
    # eyes 36-41 (image left) and 42-47 (image right)
    half_w = 0.14
    h = max(0.01, 0.055 + 0.06 * eye_open - 0.025 * max(0.0, smile - 0.4) - 0.02 * wrinkle)
    shape = np.array(
        [
            [-half_w, 0.0],
            [-half_w / 3, -h],
            [half_w / 3, -h],
            [half_w, 0.0],
            [half_w / 3, 0.8 * h],
            [-half_w / 3, 0.8 * h],
        ],
    )
    cx = 0.38 + style.eye_spacing
    pts[36:42] = shape + np.array([-cx, -0.25])
    pts[42:48] = shape + np.array([cx, -0.25])
    # mouth 48-59 outer, 60-67 inner
    cy = 0.55 - 0.02 * frown
    mw = 0.26 * style.mouth_width * (1.0 + 0.3 * stretch + 0.12 * smile - 0.08 * frown)
    corner_dy = -0.12 * smile + 0.10 * frown
    gap = 0.015 + 0.2 * mouth_open

    def bend(x: FloatArray) -> FloatArray:
        return corner_dy * (np.abs(x) / mw) ** 2

    up_x = np.array([-0.6, -0.3, 0.0, 0.3, 0.6]) * mw
    low_x = up_x[::-1]
    pts[48] = (-mw, cy + corner_dy)
    pts[49:54, 0] = up_x
    pts[49:54, 1] = cy - gap / 2 - 0.05 * np.array([0.8, 1.1, 0.9, 1.1, 0.8]) + bend(up_x)
    pts[54] = (mw, cy + corner_dy)
    pts[55:60, 0] = low_x
    pts[55:60, 1] = cy + gap / 2 + 0.06 * np.array([0.9, 1.1, 1.2, 1.1, 0.9]) + bend(low_x) + 0.05 * mouth_open
    in_up = np.array([-0.3, 0.0, 0.3]) * mw
    pts[60] = (-0.85 * mw, cy + 0.8 * corner_dy)
    pts[61:64, 0] = in_up
    pts[61:64, 1] = cy - gap / 2 + bend(in_up)
    pts[64] = (0.85 * mw, cy + 0.8 * corner_dy)
    pts[65:68, 0] = in_up[::-1]
    pts[65:68, 1] = cy + gap / 2 + bend(in_up[::-1]) + 0.05 * mouth_open
    return pts


def _to_pixels(unit: FloatArray, pose: Pose, size: int) -> FloatArray:
    """Unit face coordinates -> array coordinates (pixel centers at integers)."""
    angle = np.deg2rad(pose.roll_deg)
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    center = np.array([(size - 1) / 2 + pose.dx * size, (size - 1) / 2 + pose.dy * size])
    return center + (FACE_SCALE * size * pose.scale) * (unit @ rot.T)


def _blend(a: tuple[int, int, int], b: tuple[int, int, int], t: float) -> tuple[int, int, int]:
    t = float(np.clip(t, 0.0, 1.0))
    return (int(a[0] + (b[0] - a[0]) * t), int(a[1] + (b[1] - a[1]) * t), int(a[2] + (b[2] - a[2]) * t))


def render_frame(
    style: SubjectStyle,
    factors: FloatArray,
    pose: Pose,
    size: int,
) -> tuple[npt.NDArray[np.uint8], FloatArray]:
    """Render one frame.

    Args:
        style (SubjectStyle): Identity to draw
        factors (np.ndarray): Motion factor vector, ordered as ``FACTORS``
        pose (Pose): Head pose
        size (int): Output side in pixels

    Returns:
        tuple[np.ndarray, np.ndarray]: ``size x size x 3`` uint8 pixels and the 68x2 landmarks
    """
    m = style.expressed(factors)
    unit = face_landmarks(style, m)
    big = size * SUPERSAMPLE

    def px(points: FloatArray) -> list[tuple[float, float]]:
        # array coordinates of the big canvas are (small + 0.5) * SUPERSAMPLE - 0.5; PIL wants corners
        p = (_to_pixels(points, pose, size) + 0.5) * SUPERSAMPLE
        return [(float(x), float(y)) for x, y in p]

    canvas = Image.new("RGB", (big, big), style.background)
    draw = ImageDraw.Draw(canvas)
    t = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
    b = np.where(np.sin(t) > 0, style.face_height + 0.08 * m[_f("mouth_open")], style.face_height)
    head = np.stack([style.face_width * np.cos(t), -0.05 + b * np.sin(t)], axis=1)
    draw.polygon(px(head), fill=style.skin)
    cap_t = np.linspace(np.pi + 0.5, 2 * np.pi - 0.5, 24)
    cap = np.stack([1.05 * style.face_width * np.cos(cap_t), -0.05 + 1.06 * style.face_height * np.sin(cap_t)], axis=1)
    draw.polygon(px(cap), fill=style.hair)

    smile = float(m[_f("smile")])
    if smile > 0.4:
        cheek_color = _blend(style.skin, (220, 90, 100), (smile - 0.4) / 0.6 * 0.8)
        for side in (-1.0, 1.0):
            (x0, y0), (x1, y1) = px(np.array([[side * 0.45 - 0.13, 0.0], [side * 0.45 + 0.13, 0.24]]))
            draw.ellipse((min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1)), fill=cheek_color)
    stroke = max(1, round(style.brow_thickness * FACE_SCALE * big))
    brow_color = _blend(style.hair, (0, 0, 0), 0.3)
    draw.line(px(unit[17:22]), fill=brow_color, width=stroke)
    draw.line(px(unit[22:27]), fill=brow_color, width=stroke)
    nose_color = _blend(style.skin, (60, 40, 30), 0.45)
    thin = max(1, stroke // 2)
    draw.line(px(unit[27:31]), fill=nose_color, width=thin)
    draw.line(px(unit[31:36]), fill=nose_color, width=thin)
    wrinkle = float(m[_f("nose_wrinkle")])
    if wrinkle > 0.05:
        wrinkle_color = _blend(style.skin, (60, 40, 30), wrinkle)
        for y in (-0.22, -0.15):
            draw.line(px(np.array([[-0.1, y], [0.1, y]])), fill=wrinkle_color, width=thin)
    for eye in (unit[36:42], unit[42:48]):
        draw.polygon(px(eye), fill=(245, 245, 245))
        cx, cy = eye.mean(axis=0)
        r = min(0.05, float(eye[4, 1] - eye[1, 1]) / 2)
        (x0, y0), (x1, y1) = px(np.array([[cx - r, cy - r], [cx + r, cy + r]]))
        draw.ellipse((min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1)), fill=(30, 25, 20))
    draw.polygon(px(unit[48:60]), fill=style.lips)
    draw.polygon(px(unit[60:68]), fill=(45, 15, 20))
    frown = float(m[_f("frown")])
    if frown > 0.5:
        chin_color = _blend(style.skin, (90, 60, 50), (frown - 0.5) * 1.6)
        (x0, y0), (x1, y1) = px(np.array([[-0.12, 0.82], [0.12, 0.9]]))
        draw.ellipse((min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1)), fill=chin_color)

    small = canvas.resize((size, size), Image.Resampling.LANCZOS).filter(ImageFilter.GaussianBlur(0.5))
    return np.asarray(small, dtype=np.uint8), _to_pixels(unit, pose, size)


def _trapezoid(length: int, start: int, duration: int) -> FloatArray:
    ramp = max(1, duration // 5)
    xp = [start, start + ramp, start + duration - ramp, start + duration]
    return np.interp(np.arange(length), xp, [0.0, 1.0, 1.0, 0.0], left=0.0, right=0.0)


def factor_series(rng: np.random.Generator, length: int, active: int, signature: tuple[int, ...]) -> FloatArray:
    """Latent factor time series, ``length x len(FACTORS)`` in [0, 1].

    Each active factor gets sparse trapezoidal events; the first one per factor is strong
    so every AU driven by an active factor fires at least once. Signature factors are
    additionally co-activated together.
    """
    series = np.zeros((length, len(FACTORS)))
    n_events = max(2, round(length / FRAMES_PER_EVENT))
    for k in range(active):
        for e in range(n_events):
            if e == 0:
                amp = rng.uniform(0.85, 1.0)
            elif rng.random() < 0.75:
                amp = rng.uniform(0.6, 1.0)
            else:
                amp = rng.uniform(0.15, 0.45)
            duration = int(rng.integers(15, 51))
            start = int(rng.integers(-duration // 2, max(1, length - duration // 2)))
            series[:, k] = np.maximum(series[:, k], amp * _trapezoid(length, start, duration))
    if signature:
        for _ in range(max(1, round(length / (2 * FRAMES_PER_EVENT)))):
            duration = int(rng.integers(20, 51))
            start = int(rng.integers(0, max(1, length - duration)))
            amp = rng.uniform(0.7, 1.0)
            envelope = amp * _trapezoid(length, start, duration)
            for k in signature:
                series[:, k] = np.maximum(series[:, k], envelope)
    return series


def intensities_from_factors(series: FloatArray) -> npt.NDArray[np.int64]:
    """AU intensities 0-5 from factor values; active (> 1) exactly when the factor passes its threshold."""
    out = np.zeros((series.shape[0], N_AUS), dtype=np.int64)
    for col, au in enumerate(AU_NUMBERS):
        name, threshold = AU_RULES[au]
        f = series[:, _f(name)]
        above = 2 + np.minimum(3, np.floor(4 * (f - threshold) / (1 - threshold))).astype(np.int64)
        out[:, col] = np.where(f > threshold, above, np.where(f > threshold - 0.15, 1, 0))
    return out


def head_poses(rng: np.random.Generator, length: int, *, moving: bool) -> list[Pose]:
    if not moving:
        return [Pose() for _ in range(length)]

    def smooth(amplitude: float) -> FloatArray:
        walk = gaussian_filter1d(rng.standard_normal(length), sigma=10.0, mode="nearest")
        peak = float(np.max(np.abs(walk))) or 1.0
        return amplitude * walk / peak

    roll, dx, dy, scale = smooth(12.0), smooth(0.04), smooth(0.04), smooth(0.04)
    return [Pose(float(roll[t]), float(dx[t]), float(dy[t]), 1.0 + float(scale[t])) for t in range(length)]


def synth_generate(config: SynthConfig) -> Result[Dataset, PsmError]:
    """Generate a synthetic dataset, deterministic under ``config.seed``.

    Args:
        config (SynthConfig): Size and behaviour of the dataset

    Returns:
        Result[Dataset, PsmError]: Frames with exact landmarks and labels, or ``InvalidConfig``

    Example:
        >>> ds = synth_generate(SynthConfig(subjects=2, frames_per_subject=500, image_size=32, seed=7)).unwrap()
        >>> ds.identities
        ('SN001', 'SN002')
    """
    if config.frames_per_subject < 1:
        return fail(ErrorKind.INVALID_CONFIG, "frames_per_subject must be >= 1")
    if config.image_size < MIN_IMAGE_SIZE:
        return fail(ErrorKind.INVALID_CONFIG, f"image_size must be >= {MIN_IMAGE_SIZE}", image_size=config.image_size)
    if config.subjects < 1:
        return fail(ErrorKind.INVALID_CONFIG, "subjects must be >= 1")
    if not 1 <= config.motion_factor_count <= len(FACTORS):
        return fail(ErrorKind.INVALID_CONFIG, f"motion_factor_count must lie in [1, {len(FACTORS)}]")

    subjects: dict[str, list[FrameRef]] = {}
    latent: dict[str, FloatArray] = {}
    for s in range(config.subjects):
        identity = f"SN{s + 1:03d}"
        rng = np.random.default_rng([config.seed, s])
        style = sample_style(rng, person_specific=config.person_specific_patterns, active=config.motion_factor_count)
        series = factor_series(rng, config.frames_per_subject, config.motion_factor_count, style.signature)
        poses = head_poses(rng, config.frames_per_subject, moving=config.head_motion)
        intensities = intensities_from_factors(series)
        frames: list[FrameRef] = []
        for t in range(config.frames_per_subject):
            pixels, landmarks = render_frame(style, series[t], poses[t], config.image_size)
            frames.append(
                FrameRef(
                    identity=identity,
                    index=t,
                    labels=AURecord.of(intensities[t]),
                    landmark_status=LandmarkStatus.PRESENT,
                    landmarks=landmarks,
                    pixels=pixels,
                ),
            )
        subjects[identity] = frames
        latent[identity] = series
        logger.debug("rendered %d frames for %s (signature %s)", len(frames), identity, style.signature)

    metadata = DatasetMetadata(
        frame_size=(config.image_size, config.image_size),
        fps=config.fps,
        latent_factors=MappingProxyType(latent),
    )
    return Dataset.create(subjects, "synthetic", metadata)
