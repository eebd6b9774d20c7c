"""A small numpy neural-network stack sufficient for the two feedback autoencoders."""
from .architectures import build_ae1, build_ae2, build_from_arch
from .layers import BatchNorm, Conv2D, Dense, Layer, LeakyReLU, Reshape, ReZeroResidual, Sigmoid, Tanh
from .model import AutoEncoder, Sequential, count_flops
from .optim import Adam, AdamState, adam_step, mse_loss
from .serialization import load_model, save_model
from .training import TrainConfig, TrainResult, evaluate, train

__all__ = [
    "Adam",
    "AdamState",
    "AutoEncoder",
    "BatchNorm",
    "Conv2D",
    "Dense",
    "Layer",
    "LeakyReLU",
    "Reshape",
    "ReZeroResidual",
    "Sequential",
    "Sigmoid",
    "Tanh",
    "TrainConfig",
    "TrainResult",
    "adam_step",
    "build_ae1",
    "build_ae2",
    "build_from_arch",
    "count_flops",
    "evaluate",
    "load_model",
    "mse_loss",
    "save_model",
    "train",
]
