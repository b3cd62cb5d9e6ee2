"""Minimal reverse-mode differentiable tensor engine."""

from .functional import (batchnorm1d, conv1d, dense, dropout, flatten, mae, maxpool1d,
                         relu, upsample_nn)
from .gradcheck import GradCheckReport, grad_check, numeric_grad, relative_error
from .layers import BatchNorm1d, Conv1d, Dense, Dropout, Module
from .optim import Adam, AdamState, adam_step
from .tensor import Tensor, tensor

__all__ = [
    "Tensor", "tensor", "conv1d", "dense", "relu", "batchnorm1d", "dropout", "maxpool1d",
    "upsample_nn", "flatten", "mae", "Module", "Conv1d", "Dense", "BatchNorm1d", "Dropout",
    "Adam", "AdamState", "adam_step", "grad_check", "numeric_grad", "relative_error",
    "GradCheckReport",
]
