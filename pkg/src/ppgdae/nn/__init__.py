from .functional import (
    add,
    batch_norm,
    conv1d,
    conv1d_output_length,
    conv_transpose1d,
    conv_transpose1d_output_length,
    mul,
    relu,
    rmse_loss,
    sigmoid,
    tsum,
)
from .layers import BatchNorm1d, Conv1d, ConvTranspose1d, Module, ReLU, Sequential, Sigmoid
from .model import DaeArchitecture, DaeModel
from .optim import AdamState, adam_step
from .tensor import GraphError, Tensor

__all__ = [
    "AdamState",
    "BatchNorm1d",
    "Conv1d",
    "ConvTranspose1d",
    "DaeArchitecture",
    "DaeModel",
    "GraphError",
    "Module",
    "ReLU",
    "Sequential",
    "Sigmoid",
    "Tensor",
    "adam_step",
    "add",
    "batch_norm",
    "conv1d",
    "conv1d_output_length",
    "conv_transpose1d",
    "conv_transpose1d_output_length",
    "mul",
    "relu",
    "rmse_loss",
    "sigmoid",
    "tsum",
]
