"""Residual diffusion: schedules, the conditional process, loss, training."""

from .loss import LossBreakdown, frozen_plan_loss, trajectory_loss
from .process import (
    ResidualTrajectory,
    SamplerOutput,
    compose_trajectory,
    conditioning_channels,
    export_spatial_features,
    forward_diffuse,
    observation_mask,
    pin_observed,
    precondition_coefficients,
    predict_residual,
    reverse_step,
    sample_trajectory,
)
from .schedule import NoiseSchedule, make_schedule
from .train import (
    TrainConfig,
    fast_profile,
    gt_residuals,
    load_model,
    save_model,
    train,
    training_step,
)

__all__ = [
    "LossBreakdown",
    "NoiseSchedule",
    "ResidualTrajectory",
    "SamplerOutput",
    "TrainConfig",
    "compose_trajectory",
    "conditioning_channels",
    "export_spatial_features",
    "fast_profile",
    "forward_diffuse",
    "frozen_plan_loss",
    "gt_residuals",
    "load_model",
    "make_schedule",
    "observation_mask",
    "pin_observed",
    "precondition_coefficients",
    "predict_residual",
    "reverse_step",
    "sample_trajectory",
    "save_model",
    "train",
    "trajectory_loss",
    "training_step",
]
