"""Trajectory comparison metrics and score composition.

Distances between translations are computed in meters and reported in
centimeters; rotation metrics are unitless (quaternion chord) or radians
(geodesic). Pairwise metrics expect equal-length trajectories except the
set/sequence metrics (DTW, Frechet, Hausdorff, Chamfer), which only need two
non-empty point sets.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import kernels
from .errors import LengthMismatch, NonPositiveInput, OutOfRange
from .geometry import Trajectory, geodesic_distance, quaternion_distance

M_TO_CM = 100.0
RECALL_THRESHOLDS_M = (0.5, 0.75, 1.0)


def _paired_points(pred: Trajectory, ref: Trajectory):
    if len(pred) != len(ref):
        raise LengthMismatch(f"trajectory lengths differ: {len(pred)} vs {len(ref)}")
    return pred.translations, ref.translations


def frame_errors(pred: Trajectory, ref: Trajectory):
    """Per-frame (translation_m, geodesic_rad, quaternion_dist) arrays."""
    p, r = _paired_points(pred, ref)
    trans = np.linalg.norm(p - r, axis=1)
    geo = geodesic_distance(pred.rotations, ref.rotations)
    quat = quaternion_distance(pred.rotations, ref.rotations)
    return trans, geo, quat


def recall_at(translation_errors_m: np.ndarray, threshold_m: float) -> float:
    """Percentage of frames with translation error strictly below threshold."""
    errs = np.asarray(translation_errors_m, dtype=np.float64)
    if errs.size == 0:
        raise LengthMismatch("recall over an empty error array")
    if threshold_m <= 0.0:
        raise NonPositiveInput("recall threshold must be positive")
    return 100.0 * float(np.count_nonzero(errs < threshold_m)) / errs.size


def mean_euclidean_cm(pred: Trajectory, ref: Trajectory) -> float:
    p, r = _paired_points(pred, ref)
    return M_TO_CM * float(np.mean(np.linalg.norm(p - r, axis=1)))


def dtw_distance_cm(pred: Trajectory, ref: Trajectory) -> float:
    """DTW cost over translations, normalized by the alignment path length.

    Ties in total cost resolve to the shortest path, so the value is
    deterministic.
    """
    cost, path_len = kernels.dtw_cost_path(pred.translations, ref.translations)
    return M_TO_CM * float(cost) / int(path_len)


def frechet_distance_cm(pred: Trajectory, ref: Trajectory) -> float:
    return M_TO_CM * float(
        kernels.frechet_distance(pred.translations, ref.translations)
    )


def hausdorff_distance_cm(pred: Trajectory, ref: Trajectory) -> float:
    d = kernels.pairwise_distances(pred.translations, ref.translations)
    return M_TO_CM * float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def chamfer_l2_cm(pred: Trajectory, ref: Trajectory) -> float:
    """Symmetric Chamfer: half the sum of both directed mean nearest distances."""
    d = kernels.pairwise_distances(pred.translations, ref.translations)
    return M_TO_CM * 0.5 * float(d.min(axis=1).mean() + d.min(axis=0).mean())


def rotation_score(mean_geodesic_rad: float) -> float:
    """Map a mean geodesic error in [0, pi] onto a 0-100 score, linearly."""
    if not 0.0 <= mean_geodesic_rad <= np.pi:
        raise OutOfRange(f"mean geodesic must lie in [0, pi], got {mean_geodesic_rad}")
    return 100.0 * (1.0 - mean_geodesic_rad / np.pi)


@dataclass(frozen=True)
class SlsInputs:
    recall_75_pct: float
    rotation_score_pct: float
    bt_score_pct: float


def sls(inputs: SlsInputs) -> float:
    """Harmonic mean of the three component scores (all on 0-100 scales)."""
    vals = (inputs.recall_75_pct, inputs.rotation_score_pct, inputs.bt_score_pct)
    if any(v <= 0.0 for v in vals):
        raise NonPositiveInput(f"all score components must be positive, got {vals}")
    return 3.0 / sum(1.0 / v for v in vals)


@dataclass
class MetricReport:
    """Flat bundle of every per-pair metric, in reporting units."""

    recall_050_pct: float
    recall_075_pct: float
    recall_100_pct: float
    mean_euclidean_cm: float
    dtw_cm: float
    hausdorff_cm: float
    frechet_cm: float
    chamfer_cm: float
    mean_quaternion_dist: float
    mean_geodesic_rad: float
    rotation_score_pct: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        names = [f.name for f in fields(cls)]
        missing = [n for n in names if n not in d]
        if missing:
            raise KeyError(f"metric report missing fields: {missing}")
        return cls(**{n: float(d[n]) for n in names})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        return "\n".join(f"{k}: {v:.6f}" for k, v in sorted(self.to_dict().items()))


def evaluate_pair(pred: Trajectory, ref: Trajectory) -> MetricReport:
    trans_err, geo_err, quat_err = frame_errors(pred, ref)
    mean_geo = float(np.mean(geo_err))
    return MetricReport(
        recall_050_pct=recall_at(trans_err, RECALL_THRESHOLDS_M[0]),
        recall_075_pct=recall_at(trans_err, RECALL_THRESHOLDS_M[1]),
        recall_100_pct=recall_at(trans_err, RECALL_THRESHOLDS_M[2]),
        mean_euclidean_cm=M_TO_CM * float(np.mean(trans_err)),
        dtw_cm=dtw_distance_cm(pred, ref),
        hausdorff_cm=hausdorff_distance_cm(pred, ref),
        frechet_cm=frechet_distance_cm(pred, ref),
        chamfer_cm=chamfer_l2_cm(pred, ref),
        mean_quaternion_dist=float(np.mean(quat_err)),
        mean_geodesic_rad=mean_geo,
        rotation_score_pct=rotation_score(mean_geo),
    )


def mean_report(reports: list[MetricReport]) -> MetricReport:
    """Macro-average: plain mean of every field across reports."""
    if not reports:
        raise LengthMismatch("cannot average zero reports")
    names = [f.name for f in fields(MetricReport)]
    return MetricReport(
        **{n: float(np.mean([getattr(r, n) for r in reports])) for n in names}
    )
