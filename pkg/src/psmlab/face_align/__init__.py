from .align import AlignedFrame, align_face, canonical_eyes, eye_level_gap, transform_points
from .landmarks import (
    ExternalDetector,
    FrameLandmarks,
    LandmarkDirectory,
    LandmarkSet,
    LandmarkSource,
    detect_landmarks,
)
from .sequence import (
    AlignedCorpus,
    AlignedSequence,
    DiscardEntry,
    DiscardReason,
    align_dataset,
    preprocess_sequence,
)

__all__ = [
    "AlignedCorpus",
    "AlignedFrame",
    "AlignedSequence",
    "DiscardEntry",
    "DiscardReason",
    "ExternalDetector",
    "FrameLandmarks",
    "LandmarkDirectory",
    "LandmarkSet",
    "LandmarkSource",
    "align_dataset",
    "align_face",
    "canonical_eyes",
    "detect_landmarks",
    "eye_level_gap",
    "preprocess_sequence",
    "transform_points",
]
