"""Joint pipe detection and depth regression on log-mel segments."""

from .estimator import JointPipeDepthModel
from .io import load_checkpoint, read_dataset, save_checkpoint, write_dataset
from .network import (
    SMALL_CONFIG,
    JointModel,
    ModelConfig,
    backward,
    conv_forward,
    forward,
    forward_batch,
    init_model,
    loss_and_grad,
    loss_depth,
    loss_joint,
    loss_pipe,
)
from .train import TrainingPair, aggregate_segments, train

__all__ = [
    "JointModel",
    "JointPipeDepthModel",
    "ModelConfig",
    "SMALL_CONFIG",
    "TrainingPair",
    "aggregate_segments",
    "backward",
    "conv_forward",
    "forward",
    "forward_batch",
    "init_model",
    "load_checkpoint",
    "loss_and_grad",
    "loss_depth",
    "loss_joint",
    "loss_pipe",
    "read_dataset",
    "save_checkpoint",
    "train",
    "write_dataset",
]
