"""Metric scale alignment between reconstructed and reference distances.

Each sample pairs a reference distance in meters with the corresponding
distance in reconstruction units; the per-sample ratio reference/reconstructed
is a scale estimate, and the scene-level multiplier aggregates the valid
ratios (mean by default, median as a robustness option).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveScale, NoValidSamples
from .geometry import Trajectory

MIN_RECONSTRUCTED = 1e-6


@dataclass(frozen=True)
class ScaleEstimate:
    multiplier: float
    ratios: np.ndarray  # accepted per-sample ratios
    n_rejected: int
    aggregate: str  # "mean" or "median"


def estimate_scale(
    reference_m: np.ndarray,
    reconstructed: np.ndarray,
    use_median: bool = False,
) -> ScaleEstimate:
    """Aggregate per-pair reference/reconstructed ratios into one multiplier.

    Pairs whose reconstructed distance is <= 1e-6 are rejected (counted, not
    used); rejecting everything raises NoValidSamples.
    """
    ref = np.asarray(reference_m, dtype=np.float64)
    rec = np.asarray(reconstructed, dtype=np.float64)
    if ref.shape != rec.shape or ref.ndim != 1:
        raise ValueError(f"sample arrays must be equal-length 1-D, got {ref.shape} vs {rec.shape}")
    valid = rec > MIN_RECONSTRUCTED
    n_rejected = int(np.count_nonzero(~valid))
    if not np.any(valid):
        raise NoValidSamples(f"all {len(rec)} samples had reconstructed distance <= {MIN_RECONSTRUCTED}")
    ratios = ref[valid] / rec[valid]
    agg = "median" if use_median else "mean"
    multiplier = float(np.median(ratios) if use_median else np.mean(ratios))
    return ScaleEstimate(multiplier, ratios, n_rejected, agg)


def apply_scale(traj: Trajectory, multiplier: float) -> Trajectory:
    """Scale translations only; rotations and frame count are untouched."""
    if multiplier <= 0.0 or not np.isfinite(multiplier):
        raise NonPositiveScale(f"scale multiplier must be positive, got {multiplier}")
    return traj.with_translations(traj.translations * multiplier)


def read_distance_pairs(path):
    """Parse a reference_m,reconstructed_units CSV (optional header) into arrays."""
    ref, rec = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ValueError(
                    f"{path}:{lineno}: expected 'reference_m,reconstructed_units', got {row!r}"
                )
            if lineno == 1 and row[0].strip().lower() == "reference_m":
                continue
            try:
                ref.append(float(row[0]))
                rec.append(float(row[1]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric distance {row!r}") from exc
    return np.asarray(ref), np.asarray(rec)
