"""LSTM knowledge-tracing model: encoding, forward traces, training, AUC."""

from .kernels import BACKEND, get_backend
from .metrics import auc
from .model import (
    DktConfig,
    DktModel,
    PredictionTrace,
    encode_interaction,
    forward,
    init_model,
    interaction_index,
    load_model,
    loss,
    save_model,
)
from .training import Adam, TrainingDiverged, TrainingReport, clip_global_norm, evaluate, train

__all__ = [
    "BACKEND",
    "get_backend",
    "auc",
    "DktConfig",
    "DktModel",
    "PredictionTrace",
    "encode_interaction",
    "forward",
    "init_model",
    "interaction_index",
    "load_model",
    "loss",
    "save_model",
    "Adam",
    "TrainingDiverged",
    "TrainingReport",
    "clip_global_norm",
    "evaluate",
    "train",
]
