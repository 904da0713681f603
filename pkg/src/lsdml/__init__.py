"""Listwise self-distillation regularizer for deep metric learning, with a
small numpy MLP encoder, baseline losses, miners and a retrieval harness."""

from .config import ExperimentConfig
from .encoder import Adam, MlpEncoder, TeacherSnapshot
from .errors import LsdError
from .losses import EmbeddingBatch, LossOutput
from .lsd import LsdConfig, combined_loss, lsd_gradient, lsd_objective, lsd_value
from .trainer import evaluate, sweep, train

__version__ = "0.1.0"

__all__ = [
    "Adam", "EmbeddingBatch", "ExperimentConfig", "LossOutput", "LsdConfig", "LsdError",
    "MlpEncoder", "TeacherSnapshot", "combined_loss", "evaluate", "lsd_gradient",
    "lsd_objective", "lsd_value", "sweep", "train",
]
