from .config import (
    VARIANTS, ActionConfidenceChunk, DecoderState, HyperParams, LatentStyle,
    Observation,
)
from .model import Policy, init_params, patchify, shift_recurrent_input
from .losses import act_l1_loss, kl_gaussian, racct_loss
from .ensemble import EnsembleBuffer, temporal_ensemble
from .train import TrainResult, TrainingDiverged, stats_from_dataset, train

__all__ = [
    "VARIANTS", "ActionConfidenceChunk", "DecoderState", "EnsembleBuffer",
    "HyperParams", "LatentStyle", "Observation", "Policy", "TrainResult",
    "TrainingDiverged",
    "act_l1_loss", "init_params", "kl_gaussian", "patchify", "racct_loss",
    "shift_recurrent_input", "stats_from_dataset", "temporal_ensemble",
    "train",
]
