"""Conditional forward/reverse diffusion over spline residuals.

Poses are split as p = S + dp: S is the interpolation baseline through the
observed poses, dp the residual this process denoises. Observed frames carry
a Dirac constraint: their residual rows are exactly zero at every step of
both processes, so the final trajectory passes through every observation.

Residuals travel through the network as (7, N) channel blocks: rows 0..2
translation, rows 3..6 rotation in ambient quaternion coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import IndexOutOfRange, NumericalError, ShapeMismatch
from ..geometry import Trajectory, hemisphere_signs, quat_normalize
from ..nn.unet import UNetParams, unet_forward
from ..spline import SparseObservations, build_baseline
from .schedule import NoiseSchedule

TRANSLATION_ROWS = slice(0, 3)
ROTATION_ROWS = slice(3, 7)

# Residuals are centimetre-scale while the diffusion noise has unit variance;
# diffusing them raw would ask the denoiser for precision three orders below
# its input magnitudes. Train and sample in a space where residuals are O(1),
# dividing back out when composing poses.
RESIDUAL_SCALE = 20.0

# Prior spread assumed by the denoiser's analytic skip term, in scaled
# residual units (matches mid-sparsity residuals).
PRIOR_STD = 0.5


@dataclass(frozen=True)
class ResidualTrajectory:
    """Per-frame residuals: translations (N, 3), rotations (N, 4) ambient."""

    translations: np.ndarray
    rotations: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translations, dtype=np.float64)
        r = np.asarray(self.rotations, dtype=np.float64)
        if t.ndim != 2 or t.shape[1] != 3 or r.shape != (t.shape[0], 4):
            raise ShapeMismatch(f"residual shapes {t.shape} / {r.shape}")
        object.__setattr__(self, "translations", t)
        object.__setattr__(self, "rotations", r)

    def __len__(self) -> int:
        return self.translations.shape[0]

    def to_channels(self) -> np.ndarray:
        return np.concatenate([self.translations.T, self.rotations.T], axis=0)

    @classmethod
    def from_channels(cls, channels: np.ndarray) -> "ResidualTrajectory":
        channels = np.asarray(channels, dtype=np.float64)
        if channels.ndim != 2 or channels.shape[0] != 7:
            raise ShapeMismatch(f"expected (7, N) channels, got {channels.shape}")
        return cls(channels[TRANSLATION_ROWS].T, channels[ROTATION_ROWS].T)

    @classmethod
    def zeros(cls, n: int) -> "ResidualTrajectory":
        return cls(np.zeros((n, 3)), np.zeros((n, 4)))


@dataclass(frozen=True)
class SamplerOutput:
    trajectory: Trajectory
    bottleneck_features: np.ndarray
    residuals: ResidualTrajectory


def observation_mask(n_frames: int, indices) -> np.ndarray:
    mask = np.zeros(n_frames, dtype=np.float64)
    mask[np.asarray(indices, dtype=np.int64)] = 1.0
    return mask


def pin_observed(channels: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero the residual columns at observed frames (the Dirac constraint)."""
    out = np.array(channels, dtype=np.float64)
    out[:, mask > 0.0] = 0.0
    return out


def forward_diffuse(residual0, t: int, noise, obs_mask, schedule: NoiseSchedule):
    """Closed-form q(x_t | x_0) on unobserved rows; observed rows stay zero.

    residual0 and noise are (7, N) channel blocks (use to_channels); returns
    the diffused (7, N) block.
    """
    x0 = np.asarray(residual0, dtype=np.float64)
    eps = np.asarray(noise, dtype=np.float64)
    mask = np.asarray(obs_mask, dtype=np.float64).reshape(-1)
    if x0.shape != eps.shape or x0.ndim != 2 or x0.shape[0] != 7:
        raise ShapeMismatch(f"residual/noise shapes {x0.shape} vs {eps.shape}")
    if x0.shape[1] != mask.size:
        raise ShapeMismatch(f"mask length {mask.size} vs {x0.shape[1]} frames")
    if not 1 <= t <= schedule.t_diff:
        raise ShapeMismatch(f"t={t} outside [1, {schedule.t_diff}]")
    xt = schedule.sqrt_alpha_bar(t) * x0 + schedule.sqrt_one_minus_alpha_bar(t) * eps
    return pin_observed(xt, mask)


def reverse_step(residual_t, t: int, pred_x0, schedule: NoiseSchedule, obs_mask,
                 rng: np.random.Generator):
    """One posterior step x_t -> x_{t-1} given the model's x_0 prediction.

    Unobserved rows get the DDPM posterior mean plus sigma_t * z, with z
    drawn from rng except at t=1 where the step is deterministic. Observed
    rows are re-pinned to zero afterwards.
    """
    xt = np.asarray(residual_t, dtype=np.float64)
    x0 = np.asarray(pred_x0, dtype=np.float64)
    mask = np.asarray(obs_mask, dtype=np.float64).reshape(-1)
    if xt.shape != x0.shape or xt.ndim != 2 or xt.shape[0] != 7:
        raise ShapeMismatch(f"state/prediction shapes {xt.shape} vs {x0.shape}")
    if xt.shape[1] != mask.size:
        raise ShapeMismatch(f"mask length {mask.size} vs {xt.shape[1]} frames")
    if not 1 <= t <= schedule.t_diff:
        raise ShapeMismatch(f"t={t} outside [1, {schedule.t_diff}]")
    i = t - 1
    mean = schedule.posterior_coef_x0[i] * x0 + schedule.posterior_coef_xt[i] * xt
    if t > 1:
        z = rng.standard_normal(xt.shape)
        mean = mean + np.sqrt(schedule.posterior_variance[i]) * z
    return pin_observed(mean, mask)


def precondition_coefficients(schedule: NoiseSchedule, t: int,
                              prior_std: float = PRIOR_STD):
    """Fixed affine mixing for the denoiser: x0_hat = c_skip*x_t + c_out*F.

    With a Gaussian prior x0 ~ N(0, s^2) and x_t = sqrt(a)*x0 + sqrt(1-a)*eps,
    the posterior mean of x0 is c_skip * x_t; c_out scales the learned
    correction so its regression target is O(1) at every timestep. A network
    with a zero output head therefore starts out as the exact analytic
    denoiser for the prior and only has to learn the scene-conditional part.
    """
    if prior_std <= 0.0:
        raise ShapeMismatch(f"prior std must be positive, got {prior_std}")
    if not 1 <= t <= schedule.t_diff:
        raise ShapeMismatch(f"t={t} outside [1, {schedule.t_diff}]")
    ab = schedule.alpha_bar[t - 1]
    omb = schedule.one_minus_alpha_bar[t - 1]
    s2 = prior_std * prior_std
    denom = ab * s2 + omb
    c_skip = np.sqrt(ab) * s2 / denom
    c_out = prior_std * np.sqrt(omb / denom)
    return float(c_skip), float(c_out)


def predict_residual(x_t, cond, obs_mask, t: int, params: UNetParams,
                     schedule: NoiseSchedule, prior_std: float = PRIOR_STD):
    """Denoiser prediction of the clean residual from the diffused one.

    Returns (x0_hat pinned at observed frames, bottleneck features, network
    cache for backprop, c_out to scale upstream gradients by).
    """
    c_skip, c_out = precondition_coefficients(schedule, t, prior_std)
    y, mid, cache = unet_forward(x_t, cond, obs_mask, t, params)
    x0_hat = pin_observed(c_skip * np.asarray(x_t, dtype=np.float64) + c_out * y,
                          obs_mask)
    return x0_hat, mid, cache, c_out


def compose_trajectory(baseline: Trajectory, residual: ResidualTrajectory,
                       obs: SparseObservations) -> Trajectory:
    """p = S + dp with quaternion renormalization; observed poses verbatim."""
    if len(residual) != len(baseline):
        raise ShapeMismatch(f"{len(residual)} residuals for {len(baseline)} frames")
    trans = baseline.translations + residual.translations
    raw = baseline.rotations + residual.rotations
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms < 1e-9) or not np.all(np.isfinite(raw)):
        raise NumericalError(
            f"degenerate composed rotation (min norm {norms.min():.3e})"
        )
    rots = quat_normalize(raw)
    trans[obs.indices] = obs.translations
    rots[obs.indices] = obs.rotations
    signs = hemisphere_signs(rots)
    return Trajectory(trans, rots * signs[:, None], baseline.frame_rate_hint)


def conditioning_channels(baseline: Trajectory, indices) -> np.ndarray:
    """Baseline bending as (7, N): baseline minus the chord interpolation.

    The residual lives at centimetre scale while absolute positions span
    metres; feeding raw poses buries the informative local curvature two
    orders of magnitude below the channel variance. Subtracting the
    piecewise-linear interpolation of the observed poses (the chords the
    spline bends away from) leaves exactly that curvature, invariant to
    where the scene sits in the room and zero at observed frames. The same
    unit scaling as the residual keeps the channels O(1).
    """
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    n = len(baseline)
    if idx.size < 2 or idx.min() != 0 or idx.max() != n - 1:
        raise ShapeMismatch(
            f"conditioning needs observed endpoints, got indices {idx[:4]}..."
        )
    frames = np.arange(n, dtype=np.float64)
    knots = idx.astype(np.float64)
    pose = np.concatenate([baseline.translations, baseline.rotations], axis=1)
    chord = np.stack(
        [np.interp(frames, knots, pose[idx, c]) for c in range(7)], axis=0
    )
    return RESIDUAL_SCALE * (pose.T - chord)


def sample_trajectory(params: UNetParams, obs: SparseObservations,
                      schedule: NoiseSchedule, seed: int,
                      residual_scale: float = RESIDUAL_SCALE,
                      prior_std: float = PRIOR_STD) -> SamplerOutput:
    """Full reverse chain from noise, conditioned on the observations."""
    rng = np.random.default_rng(seed)
    baseline = build_baseline(obs, mode="catmull_rom")
    n = len(baseline)
    mask = observation_mask(n, obs.indices)
    cond = conditioning_channels(baseline, obs.indices)

    x = pin_observed(rng.standard_normal((7, n)), mask)
    bottleneck = None
    for t in range(schedule.t_diff, 0, -1):
        pred, mid, _, _ = predict_residual(x, cond, mask, t, params, schedule,
                                           prior_std)
        x = reverse_step(x, t, pred, schedule, mask, rng)
        if t == 1:
            bottleneck = mid
    residual = ResidualTrajectory.from_channels(x / residual_scale)
    trajectory = compose_trajectory(baseline, residual, obs)
    return SamplerOutput(trajectory, bottleneck, residual)


def export_spatial_features(out: SamplerOutput, frame_indices) -> np.ndarray:
    """Per-frame records [7 pose values || C_b bottleneck values].

    The bottleneck runs at a quarter of the frame rate; it is upsampled back
    to frame resolution by linear interpolation (bottleneck column j sits at
    frame 4j, clamped at the tail), so records at aligned frames reproduce
    the raw column exactly.
    """
    idx = np.asarray(frame_indices, dtype=np.int64).reshape(-1)
    n = len(out.trajectory)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexOutOfRange(f"frame indices must lie in [0, {n})")
    feats = out.bottleneck_features
    m = feats.shape[1]
    coord = np.minimum(idx / 4.0, m - 1.0)
    lo = np.floor(coord).astype(np.int64)
    hi = np.minimum(lo + 1, m - 1)
    w = coord - lo
    cols = feats[:, lo] * (1.0 - w) + feats[:, hi] * w
    pose = np.concatenate(
        [out.trajectory.translations[idx], out.trajectory.rotations[idx]], axis=1
    )
    return np.concatenate([pose, cols.T], axis=1)
