"""CNN enhancement: layers, model, training and inference."""
from .layers import BatchNormLayer, ConvLayer
from .model import (
    CHANNELS,
    EnhanceModel,
    UntrainedModelError,
    backward,
    build_model,
    forward,
    forward_batch,
    load_model,
    parameters,
    save_model,
)
from .training import (
    AdamState,
    TrainConfig,
    TrainHistory,
    adam_step,
    enhance,
    extract_patches,
    history_to_csv,
    init_adam,
    make_training_pair,
    mse_loss,
    train,
)

__all__ = [
    "BatchNormLayer",
    "ConvLayer",
    "CHANNELS",
    "EnhanceModel",
    "UntrainedModelError",
    "backward",
    "build_model",
    "forward",
    "forward_batch",
    "load_model",
    "parameters",
    "save_model",
    "AdamState",
    "TrainConfig",
    "TrainHistory",
    "adam_step",
    "enhance",
    "extract_patches",
    "history_to_csv",
    "init_adam",
    "make_training_pair",
    "mse_loss",
    "train",
]
