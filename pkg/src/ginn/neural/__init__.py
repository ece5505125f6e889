from .losses import Standardizer, LossSpec, ginn_loss, ginn_loss_grad, normalize_targets
from .network import LstmNetwork, NetworkConfig
from .optim import OptimizerState, adamw_step
from .training import (GinnDataset, GinnModel, TrainConfig, TrainingError, fit_model,
                       rolling_predict, train)

__all__ = [
    "GinnDataset", "GinnModel", "Standardizer", "LossSpec", "LstmNetwork", "NetworkConfig",
    "OptimizerState", "TrainConfig", "TrainingError", "adamw_step", "fit_model", "ginn_loss",
    "ginn_loss_grad", "normalize_targets", "rolling_predict", "train",
]
