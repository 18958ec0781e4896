"""Sparse-to-dense camera trajectory reconstruction.

A spline baseline interpolates sparse pose observations, and a 1D U-Net
diffusion model predicts the residual between that baseline and the true
dense trajectory. The package also ships the evaluation stack used around
that pipeline: curve metrics, Bradley-Terry ranking of method preferences,
and metric-scale alignment from known scene distances.
"""

from . import errors
from .data import (
    ObservationSpec,
    SyntheticSceneParams,
    generate_scene,
    list_scenes,
    observation_indices,
    read_observations_csv,
    read_trajectory_csv,
    subsample_observations,
    write_observations_csv,
    write_scene,
    write_trajectory_csv,
)
from .diffusion import (
    NoiseSchedule,
    ResidualTrajectory,
    SamplerOutput,
    TrainConfig,
    export_spatial_features,
    fast_profile,
    load_model,
    make_schedule,
    sample_trajectory,
    save_model,
    train,
    trajectory_loss,
)
from .geometry import (
    Pose,
    Trajectory,
    geodesic_distance,
    hemisphere_align,
    quat_multiply,
    quat_normalize,
    slerp,
)
from .metrics import (
    MetricReport,
    SlsInputs,
    chamfer_l2_cm,
    dtw_distance_cm,
    evaluate_pair,
    frechet_distance_cm,
    hausdorff_distance_cm,
    mean_euclidean_cm,
    mean_report,
    recall_at,
    rotation_score,
    sls,
)
from .ranking import BtResult, bt_fit, bt_scores, build_matrix, read_judgments
from .scale import ScaleEstimate, apply_scale, estimate_scale, read_distance_pairs
from .spline import SparseObservations, arc_length_resample, build_baseline, densify

__version__ = "0.1.0"

__all__ = [
    "BtResult",
    "MetricReport",
    "NoiseSchedule",
    "ObservationSpec",
    "Pose",
    "ResidualTrajectory",
    "SamplerOutput",
    "ScaleEstimate",
    "SlsInputs",
    "SparseObservations",
    "SyntheticSceneParams",
    "TrainConfig",
    "Trajectory",
    "apply_scale",
    "arc_length_resample",
    "bt_fit",
    "bt_scores",
    "build_baseline",
    "build_matrix",
    "chamfer_l2_cm",
    "densify",
    "dtw_distance_cm",
    "errors",
    "estimate_scale",
    "evaluate_pair",
    "export_spatial_features",
    "fast_profile",
    "frechet_distance_cm",
    "generate_scene",
    "geodesic_distance",
    "hausdorff_distance_cm",
    "hemisphere_align",
    "list_scenes",
    "load_model",
    "make_schedule",
    "mean_euclidean_cm",
    "mean_report",
    "observation_indices",
    "quat_multiply",
    "quat_normalize",
    "read_distance_pairs",
    "read_judgments",
    "read_observations_csv",
    "read_trajectory_csv",
    "recall_at",
    "rotation_score",
    "sample_trajectory",
    "save_model",
    "slerp",
    "sls",
    "subsample_observations",
    "train",
    "trajectory_loss",
    "write_observations_csv",
    "write_scene",
    "write_trajectory_csv",
]
