from .bundle import BUNDLE_FORMAT, ModelBundle, Provenance, validate_model_config
from .gradcheck import MINIATURE, GradientReport, gradient_check
from .losses import LossBreakdown, compute_losses, decay_weight
from .networks import CycleNetworks
from .ops import encode_batch, encode_motion, remove_batch, remove_expression, retrieve_expression
from .training import OptimizerState, PairBatch, train_step

__all__ = [
    "BUNDLE_FORMAT",
    "MINIATURE",
    "CycleNetworks",
    "GradientReport",
    "LossBreakdown",
    "ModelBundle",
    "OptimizerState",
    "PairBatch",
    "Provenance",
    "compute_losses",
    "decay_weight",
    "encode_batch",
    "encode_motion",
    "gradient_check",
    "remove_batch",
    "remove_expression",
    "retrieve_expression",
    "train_step",
    "validate_model_config",
]
