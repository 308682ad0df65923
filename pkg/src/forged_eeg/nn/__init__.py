"""From-scratch CNN: layers with hand-written gradients, Adam, training loop."""

from .estimator import ForgedCnnClassifier
from .layers import (
    conv2d_backward,
    conv2d_forward,
    fc_backward,
    fc_forward,
    maxpool_backward,
    maxpool_forward,
    relu_backward,
    relu_forward,
    softmax,
    softmax_ce,
)
from .model import CnnModel, build_paper_cnn, load_checkpoint, save_checkpoint
from .optim import AdamState, adam_step
from .train import History, TrainConfig, evaluate, predict, predict_proba, train

__all__ = [
    "AdamState",
    "CnnModel",
    "ForgedCnnClassifier",
    "History",
    "TrainConfig",
    "adam_step",
    "build_paper_cnn",
    "conv2d_backward",
    "conv2d_forward",
    "evaluate",
    "fc_backward",
    "fc_forward",
    "load_checkpoint",
    "maxpool_backward",
    "maxpool_forward",
    "predict",
    "predict_proba",
    "relu_backward",
    "relu_forward",
    "save_checkpoint",
    "softmax",
    "softmax_ce",
    "train",
]
