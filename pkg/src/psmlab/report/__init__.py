from .figures import ALIASES, MULTI_RUN_STYLES, STYLES, Style, canonical_style, field, report
from .manifest import MANIFEST_NAME, RunManifest, hash_path
from .quality import NoiseReport, neutral_consistency, noise_check, pixel_distance

__all__ = [
    "ALIASES",
    "MANIFEST_NAME",
    "MULTI_RUN_STYLES",
    "STYLES",
    "NoiseReport",
    "RunManifest",
    "Style",
    "canonical_style",
    "field",
    "hash_path",
    "neutral_consistency",
    "noise_check",
    "pixel_distance",
    "report",
]
