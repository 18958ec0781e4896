"""Hand-rolled neural net: layers, a 1-D U-Net, Adam, grad checking, checkpoints."""

from .checkpoint import load_tensors, save_tensors
from .gradcheck import grad_check
from .optim import AdamState, adam_init, adam_step
from .unet import (
    UNetConfig,
    UNetParams,
    init_params,
    params_from_tensors,
    params_to_tensors,
    unet_backward,
    unet_forward,
)

__all__ = [
    "AdamState",
    "UNetConfig",
    "UNetParams",
    "adam_init",
    "adam_step",
    "grad_check",
    "init_params",
    "load_tensors",
    "params_from_tensors",
    "params_to_tensors",
    "save_tensors",
    "unet_backward",
    "unet_forward",
]
