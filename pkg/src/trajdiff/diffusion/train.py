"""Training loop for the residual denoiser.

Each iteration crops a random window out of a ground-truth trajectory,
subsamples it at a random stride with a random grid phase (first and last
frames always observed, gaps capped at 20 frames), builds the spline
baseline, diffuses the ground-truth residual to a random timestep, predicts
the clean residual, composes the predicted trajectory, and applies the
dense-curve loss. The crop and phase jitter stop the network from
memorizing per-scene residual patterns; without them every (scene, stride)
pair maps to one fixed target. Gradients accumulate over a fixed window
before each Adam update. Everything is driven by one seeded generator, so a
fixed seed reproduces the loss curve bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..errors import EmptyDataset, InvalidParams, NonFiniteLoss, NumericalError
from ..geometry import Trajectory, hemisphere_signs
from ..nn.checkpoint import load_tensors, save_tensors
from ..nn.optim import adam_init, adam_step
from ..nn.unet import (
    UNetConfig,
    UNetParams,
    init_params,
    params_from_tensors,
    params_to_tensors,
    unet_backward,
)
from ..spline import SparseObservations, build_baseline
from .loss import trajectory_loss
from .process import (
    PRIOR_STD,
    RESIDUAL_SCALE,
    ResidualTrajectory,
    conditioning_channels,
    forward_diffuse,
    observation_mask,
    predict_residual,
)
from .schedule import SCHEDULE_KINDS, NoiseSchedule, make_schedule

MAX_OBSERVATION_GAP = 20
MIN_TRAIN_FRAMES = 8
CROP_MIN_FRAMES = 8
_KIND_CODES = {"linear": 0.0, "cosine": 1.0, "custom": 2.0}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 30000
    learning_rate: float = 5e-6
    batch_size: int = 1
    accumulation: int = 8
    t_diff: int = 256
    schedule_kind: str = "cosine"
    stride_min: int = 3
    stride_max: int = 20
    n_per_segment: int = 8
    n_eval_multiplier: float = 2.0
    ema_decay: float = 0.999
    lr_schedule: str = "cosine"
    seed: int = 0
    log_every: int = 50
    checkpoint_every: int = 0

    def __post_init__(self):
        positive = (
            ("iterations", self.iterations),
            ("learning_rate", self.learning_rate),
            ("batch_size", self.batch_size),
            ("accumulation", self.accumulation),
            ("t_diff", self.t_diff),
            ("stride_min", self.stride_min),
            ("stride_max", self.stride_max),
            ("n_per_segment", self.n_per_segment),
            ("n_eval_multiplier", self.n_eval_multiplier),
        )
        for name, value in positive:
            if value <= 0:
                raise InvalidParams(f"{name} must be positive, got {value}")
        if self.stride_min < 2 or self.stride_min > self.stride_max:
            raise InvalidParams(
                f"stride bounds [{self.stride_min}, {self.stride_max}] invalid"
            )
        if self.stride_max > MAX_OBSERVATION_GAP:
            raise InvalidParams(
                f"stride_max {self.stride_max} exceeds the "
                f"{MAX_OBSERVATION_GAP}-frame observation gap cap"
            )
        if not 0.0 <= self.ema_decay < 1.0:
            raise InvalidParams(f"ema_decay must lie in [0, 1), got {self.ema_decay}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise InvalidParams(f"unknown lr schedule {self.lr_schedule!r}")
        if self.schedule_kind not in SCHEDULE_KINDS:
            raise InvalidParams(f"unknown schedule kind {self.schedule_kind!r}")


def fast_profile(**overrides) -> TrainConfig:
    """Reduced profile for CI: fewer iterations, hotter lr, shorter chain."""
    cfg = TrainConfig(iterations=5000, learning_rate=1e-4, t_diff=64)
    return replace(cfg, **overrides) if overrides else cfg


def gt_residuals(gt: Trajectory, baseline: Trajectory, indices) -> ResidualTrajectory:
    """Ground-truth residual gt - baseline, exactly zero at observed frames.

    Rotations are differenced in ambient 4-space after flipping each
    ground-truth quaternion onto its baseline counterpart's hemisphere.
    """
    idx = np.asarray(indices, dtype=np.int64)
    dt = gt.translations - baseline.translations
    s = np.where(np.sum(gt.rotations * baseline.rotations, axis=1) < 0.0, -1.0, 1.0)
    dr = s[:, None] * gt.rotations - baseline.rotations
    dt[idx] = 0.0
    dr[idx] = 0.0
    return ResidualTrajectory(dt, dr)


def draw_timestep(rng: np.random.Generator, t_diff: int) -> int:
    """Draw a training timestep with probability proportional to t.

    The max of two uniform draws spends most updates at the noisy end,
    where denoising has to read the conditioning channels instead of the
    noisy input itself; the near-clean low-t steps need far less practice.
    """
    a = int(rng.integers(1, t_diff + 1))
    b = int(rng.integers(1, t_diff + 1))
    return max(a, b)


def training_step(traj: Trajectory, params: UNetParams, schedule: NoiseSchedule,
                  config: TrainConfig, rng: np.random.Generator):
    """One sample's loss and parameter gradients (not yet averaged)."""
    n_full = len(traj)
    stride = int(rng.integers(config.stride_min, config.stride_max + 1))
    stride = min(stride, n_full - 1)

    # random temporal crop, long enough for an interior observation
    min_len = min(n_full, max(CROP_MIN_FRAMES, 2 * stride + 2))
    n = int(rng.integers(min_len, n_full + 1))
    start = int(rng.integers(0, n_full - n + 1))
    traj = Trajectory(
        traj.translations[start:start + n],
        traj.rotations[start:start + n],
        traj.frame_rate_hint,
    )

    # observation grid with a random phase; endpoints stay observed and
    # every gap stays <= stride <= MAX_OBSERVATION_GAP
    phase = int(rng.integers(0, stride))
    indices = np.arange(phase, n, stride, dtype=np.int64)
    if indices[0] != 0:
        indices = np.concatenate(([0], indices))
    if indices[-1] != n - 1:
        indices = np.append(indices, n - 1)
    obs = SparseObservations.from_trajectory(traj, indices)
    baseline = build_baseline(obs)
    mask = observation_mask(n, indices)

    res0 = gt_residuals(traj, baseline, indices)
    x0 = RESIDUAL_SCALE * res0.to_channels()
    t = draw_timestep(rng, schedule.t_diff)
    noise = rng.standard_normal((7, n))
    xt = forward_diffuse(x0, t, noise, mask, schedule)
    cond = conditioning_channels(baseline, indices)

    pred, _, cache, c_out = predict_residual(xt, cond, mask, t, params, schedule)
    pred = pred / RESIDUAL_SCALE

    pt = baseline.translations + pred[0:3].T
    praw = baseline.rotations + pred[3:7].T
    vnorm = np.linalg.norm(praw, axis=1, keepdims=True)
    if not np.all(np.isfinite(praw)) or np.any(vnorm < 1e-9):
        raise NonFiniteLoss(
            f"composed rotation degenerate at t={t}, stride={stride} "
            f"(min norm {vnorm.min():.3e})"
        )
    punit = praw / vnorm
    signs = hemisphere_signs(punit)
    pred_traj = Trajectory(pt, punit * signs[:, None], traj.frame_rate_hint)

    n_eval = max(2, int(round(config.n_eval_multiplier * n)))
    breakdown = trajectory_loss(pred_traj, traj, config.n_per_segment, n_eval)
    if not np.isfinite(breakdown.loss):
        raise NonFiniteLoss(
            f"loss {breakdown.loss} at t={t}, stride={stride}, "
            f"terms ({breakdown.translation_term}, {breakdown.rotation_term})"
        )

    g_aligned = breakdown.grad_rotations * signs[:, None]
    g_raw = (g_aligned - np.sum(g_aligned * punit, axis=1, keepdims=True) * punit)
    g_raw = g_raw / vnorm
    g_channels = np.concatenate([breakdown.grad_translations.T, g_raw.T], axis=0)
    g_channels *= c_out / RESIDUAL_SCALE
    g_channels[:, mask > 0.0] = 0.0

    grads = unet_backward(g_channels, cache)
    record = {
        "loss": breakdown.loss,
        "translation_term": breakdown.translation_term,
        "rotation_term": breakdown.rotation_term,
        "stride": stride,
        "t": t,
    }
    return grads, record


def train(dataset, config: TrainConfig, out_path, log_path=None,
          params: UNetParams | None = None):
    """Run the loop; returns (params, history of logged records).

    out_path receives the final checkpoint (and periodic ones when
    checkpoint_every > 0, overwriting in place). log_path, when given, gets
    one JSON object per logged iteration, line-delimited.

    The returned and saved weights are a bias-corrected exponential moving
    average over the optimizer trajectory (ema_decay per Adam step), which
    samples noticeably better than the raw final iterate. ema_decay=0
    degenerates to the raw weights.
    """
    dataset = list(dataset)
    if not dataset:
        raise EmptyDataset("training needs at least one trajectory")
    for i, traj in enumerate(dataset):
        if len(traj) < MIN_TRAIN_FRAMES:
            raise InvalidParams(
                f"trajectory {i} has {len(traj)} frames; need >= {MIN_TRAIN_FRAMES}"
            )

    rng = np.random.default_rng(config.seed)
    if params is None:
        params = init_params(UNetConfig(), rng)
    schedule = make_schedule(config.t_diff, config.schedule_kind)
    state = adam_init(params.tensors, lr=config.learning_rate)

    ema = {name: np.zeros_like(t) for name, t in params.tensors.items()}
    ema_updates = 0

    def ema_params() -> UNetParams:
        if ema_updates == 0:
            return params
        bc = 1.0 - config.ema_decay**ema_updates
        return UNetParams(params.config, {n: a / bc for n, a in ema.items()})

    accum: dict[str, np.ndarray] = {}
    history: list[dict] = []
    log_file = open(log_path, "w") if log_path is not None else None
    try:
        for it in range(1, config.iterations + 1):
            for _ in range(config.batch_size):
                traj = dataset[int(rng.integers(len(dataset)))]
                try:
                    grads, record = training_step(traj, params, schedule, config, rng)
                except NumericalError as exc:
                    raise NonFiniteLoss(f"iteration {it}: {exc}") from exc
                scale = 1.0 / (config.accumulation * config.batch_size)
                for name, g in grads.items():
                    if name in accum:
                        accum[name] += scale * g
                    else:
                        accum[name] = scale * g
            if it % config.accumulation == 0:
                if config.lr_schedule == "cosine":
                    u = it / config.iterations
                    state.lr = config.learning_rate * 0.5 * (1.0 + np.cos(np.pi * u))
                adam_step(params.tensors, accum, state)
                accum.clear()
                for name, t in params.tensors.items():
                    ema[name] *= config.ema_decay
                    ema[name] += (1.0 - config.ema_decay) * t
                ema_updates += 1
            if it == 1 or it == config.iterations or it % config.log_every == 0:
                record = dict(record, iteration=it)
                history.append(record)
                if log_file is not None:
                    log_file.write(json.dumps(record) + "\n")
                    log_file.flush()
            if config.checkpoint_every and it % config.checkpoint_every == 0:
                save_model(out_path, ema_params(), schedule, iterations=it,
                           seed=config.seed, residual_scale=RESIDUAL_SCALE,
                           prior_std=PRIOR_STD, ema_decay=config.ema_decay)
    finally:
        if log_file is not None:
            log_file.close()
    final = ema_params()
    save_model(out_path, final, schedule, iterations=config.iterations,
               seed=config.seed, residual_scale=RESIDUAL_SCALE,
               prior_std=PRIOR_STD, ema_decay=config.ema_decay)
    return final, history


def save_model(path, params: UNetParams, schedule: NoiseSchedule, **meta) -> None:
    tensors = params_to_tensors(params)
    tensors["schedule.kind_code"] = np.asarray(_KIND_CODES.get(schedule.kind, 2.0))
    tensors["schedule.beta"] = schedule.beta
    for key, value in meta.items():
        tensors[f"train.{key}"] = np.asarray(float(value))
    save_tensors(path, tensors)


def load_model(path):
    """Read a checkpoint back as (params, schedule, extra scalars)."""
    tensors = load_tensors(Path(path))
    params = params_from_tensors(tensors)
    kind = _KIND_NAMES.get(float(tensors["schedule.kind_code"]), "custom")
    schedule = NoiseSchedule.from_beta(tensors["schedule.beta"], kind)
    extra = {
        name[len("train.") :]: float(arr)
        for name, arr in tensors.items()
        if name.startswith("train.")
    }
    return params, schedule, extra
