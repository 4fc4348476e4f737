from .au import AU_NAMES, AU_NUMBERS, N_AUS, AURecord, au_label, au_position, binarize
from .dataset import Dataset, DatasetMetadata, FrameRef, LandmarkStatus
from .disfa import load_disfa, write_disfa_tree
from .splits import identity_folds, stratified_split
from .stats import AUStatistics, au_statistics
from .synth import synth_generate

__all__ = [
    "AU_NAMES",
    "AU_NUMBERS",
    "N_AUS",
    "AURecord",
    "AUStatistics",
    "Dataset",
    "DatasetMetadata",
    "FrameRef",
    "LandmarkStatus",
    "au_label",
    "au_position",
    "au_statistics",
    "binarize",
    "identity_folds",
    "load_disfa",
    "stratified_split",
    "synth_generate",
    "write_disfa_tree",
]
