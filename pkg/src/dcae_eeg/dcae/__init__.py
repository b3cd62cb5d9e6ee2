"""The autoencoder, its losses, training and evaluation."""

from .checkpoint import load_checkpoint, save_checkpoint
from .losses import (LossBreakdown, combined_loss, frequency_error, loss_ft, loss_stft,
                     loss_ts, weighted_total)
from .model import DCAE, LOSS_MODES, DcaeConfig, IdentityModel, build_model
from .training import (LOG_COLUMNS, EpochLog, Metrics, Reconstruction, evaluate,
                       reconstruct, train, write_train_log)

__all__ = [
    "DCAE", "DcaeConfig", "IdentityModel", "LOSS_MODES", "build_model", "LossBreakdown",
    "combined_loss", "frequency_error", "loss_ft", "loss_stft", "loss_ts", "weighted_total",
    "load_checkpoint", "save_checkpoint", "train", "evaluate", "reconstruct", "EpochLog",
    "Metrics", "Reconstruction", "write_train_log", "LOG_COLUMNS",
]
