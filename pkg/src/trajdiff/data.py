"""Synthetic walkthrough scenes, observation subsampling, and CSV formats.

Scenes imitate a person filming while walking building interiors: a seeded
rectilinear waypoint walk across a room grid, low-pass filtered into rounded
corners, with heading-aligned yaw, lateral sway, head-bob pitch, and bounded
smooth noise. Generation is deterministic per (params, seed) and guarantees
consecutive-frame translation gaps of at most speed_max / frame_rate.

Trajectory CSV schema (also used for observations, restricted to observed
frames): header exactly "frame,tx,ty,tz,qw,qx,qy,qz", one row per frame,
floats at 17 significant digits so float64 round-trips bitwise. A scene
directory holds gt.csv plus obs_k<stride>.csv files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidParams,
    MalformedHeader,
    NonFiniteValue,
    NonUnitQuaternion,
    StrideTooLarge,
)
from .geometry import Trajectory, quat_from_axis_angle, quat_multiply
from .spline import SparseObservations

CSV_HEADER = "frame,tx,ty,tz,qw,qx,qy,qz"
QUAT_NORM_TOL = 1e-3
GT_FILENAME = "gt.csv"

# noise rides on top of sway and scales away with it, so the zero-sway case
# degenerates to the bare smoothed walk
_NOISE_AMP_FRACTION = 0.15  # of sway amplitude
_NOISE_RATE_FRACTION = 0.25  # of the sway velocity budget
_NOISE_SMOOTHING_S = 0.4
_PITCH_AMPLITUDE_RAD = 0.06
_PITCH_TILT_RAD = 0.15


@dataclass(frozen=True)
class SyntheticSceneParams:
    n_frames: int = 128
    frame_rate: float = 30.0
    room_grid: tuple[int, int] = (4, 3)
    room_size_m: float = 2.0
    waypoint_count: int = 8
    speed_min: float = 0.5
    speed_max: float = 1.6
    sway_amplitude_m: float = 0.10
    sway_frequency_hz: float = 1.2
    heading_smoothing_s: float = 0.35
    camera_height_m: float = 1.5

    def __post_init__(self):
        positives = {
            "n_frames": self.n_frames,
            "frame_rate": self.frame_rate,
            "room_size_m": self.room_size_m,
            "waypoint_count": self.waypoint_count,
            "speed_min": self.speed_min,
            "speed_max": self.speed_max,
            "sway_frequency_hz": self.sway_frequency_hz,
            "heading_smoothing_s": self.heading_smoothing_s,
            "camera_height_m": self.camera_height_m,
        }
        bad = [k for k, v in positives.items() if v <= 0]
        if bad:
            raise InvalidParams(f"parameters must be positive: {bad}")
        if self.n_frames < 8:
            raise InvalidParams("n_frames must be at least 8")
        if min(self.room_grid) < 2:
            raise InvalidParams("room_grid needs at least 2 rooms per axis")
        if self.sway_amplitude_m < 0.0 or self.sway_amplitude_m >= 0.5:
            raise InvalidParams("sway amplitude must lie in [0, 0.5) m")
        if self.speed_min > self.base_speed_max():
            raise InvalidParams(
                "speed_min exceeds the walk-speed budget left after sway and "
                f"noise ({self.base_speed_max():.3f} m/s); lower the sway "
                "amplitude/frequency or widen the speed range"
            )

    def sway_rate(self) -> float:
        return self.sway_amplitude_m * 2.0 * np.pi * self.sway_frequency_hz

    def base_speed_max(self) -> float:
        return self.speed_max - (1.0 + _NOISE_RATE_FRACTION) * self.sway_rate()


@dataclass(frozen=True)
class ObservationSpec:
    """Every stride-th frame is observed; endpoints are always included."""

    stride: int

    def __post_init__(self):
        if self.stride < 2:
            raise InvalidParams(f"observation stride must be >= 2, got {self.stride}")


def observation_indices(n_frames: int, stride: int) -> np.ndarray:
    if stride < 2:
        raise InvalidParams(f"observation stride must be >= 2, got {stride}")
    if stride >= n_frames:
        raise StrideTooLarge(f"stride {stride} >= trajectory length {n_frames}")
    idx = np.arange(0, n_frames, stride, dtype=np.int64)
    if idx[-1] != n_frames - 1:
        idx = np.append(idx, n_frames - 1)
    return idx


def subsample_observations(traj: Trajectory, spec: ObservationSpec) -> SparseObservations:
    idx = observation_indices(len(traj), spec.stride)
    return SparseObservations.from_trajectory(traj, idx)


def _smooth(values: np.ndarray, sigma_frames: float) -> np.ndarray:
    """Gaussian low-pass along axis 0 with reflected ends."""
    if sigma_frames <= 0.0:
        return values.copy()
    radius = max(1, int(np.ceil(3.0 * sigma_frames)))
    xs = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (xs / sigma_frames) ** 2)
    kernel /= kernel.sum()
    padded = np.pad(values, [(radius, radius)] + [(0, 0)] * (values.ndim - 1), mode="reflect")
    out = np.empty_like(values)
    flat = padded.reshape(len(padded), -1)
    smoothed = np.stack([np.convolve(flat[:, c], kernel, mode="valid") for c in range(flat.shape[1])], axis=1)
    return smoothed.reshape(values.shape)


def _waypoints(params: SyntheticSceneParams, rng: np.random.Generator) -> np.ndarray:
    """Jittered room centers along a non-backtracking lattice walk.

    Extends past waypoint_count until the path is long enough to fill the
    requested duration at the fastest base speed.
    """
    gx, gy = params.room_grid
    cell = np.array([rng.integers(gx), rng.integers(gy)])
    cells = [cell.copy()]
    prev_step = None
    needed = params.base_speed_max() * params.n_frames / params.frame_rate + 2.0 * params.room_size_m
    steps = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])
    path_len = 0.0
    while len(cells) < params.waypoint_count or path_len < needed:
        options = []
        for s in steps:
            nxt = cell + s
            if 0 <= nxt[0] < gx and 0 <= nxt[1] < gy:
                if prev_step is None or not np.array_equal(s, -prev_step):
                    options.append(s)
        step = options[rng.integers(len(options))]
        prev_step = step
        cell = cell + step
        cells.append(cell.copy())
        path_len += params.room_size_m
    jitter = rng.uniform(-0.15, 0.15, size=(len(cells), 2)) * params.room_size_m
    centers = (np.array(cells, dtype=np.float64) + 0.5) * params.room_size_m + jitter
    points = np.column_stack([centers, np.full(len(cells), params.camera_height_m)])
    return points


def _walk_positions(
    waypoints: np.ndarray, params: SyntheticSceneParams, rng: np.random.Generator
) -> np.ndarray:
    """Frame-rate positions along the waypoint polyline at per-leg speeds."""
    legs = np.diff(waypoints, axis=0)
    leg_len = np.linalg.norm(legs, axis=1)
    speeds = rng.uniform(params.speed_min, params.base_speed_max(), size=len(leg_len))
    leg_time = leg_len / speeds
    t_knots = np.concatenate([[0.0], np.cumsum(leg_time)])
    t = np.arange(params.n_frames) / params.frame_rate
    if t[-1] > t_knots[-1]:
        raise InvalidParams("waypoint path too short for the requested duration")
    return np.column_stack(
        [np.interp(t, t_knots, waypoints[:, c]) for c in range(3)]
    )


def generate_scene(params: SyntheticSceneParams, seed: int) -> Trajectory:
    """Build one ground-truth trajectory; deterministic in (params, seed)."""
    rng = np.random.default_rng(seed)
    fps = params.frame_rate
    sigma = params.heading_smoothing_s * fps

    base = _smooth(_walk_positions(_waypoints(params, rng), params, rng), sigma)

    velocity = np.gradient(base, axis=0) * fps
    yaw = np.arctan2(velocity[:, 1], velocity[:, 0])
    yaw = _smooth(np.unwrap(yaw), sigma)

    t = np.arange(params.n_frames) / fps
    phase = rng.uniform(0.0, 2.0 * np.pi, size=3)
    lateral = np.column_stack([-np.sin(yaw), np.cos(yaw), np.zeros_like(yaw)])
    sway = (
        params.sway_amplitude_m
        * np.sin(2.0 * np.pi * params.sway_frequency_hz * t + phase[0])[:, None]
        * lateral
    )

    noise_amp = _NOISE_AMP_FRACTION * params.sway_amplitude_m
    noise = _smooth(rng.standard_normal((params.n_frames, 3)), _NOISE_SMOOTHING_S * fps)
    noise[:, 2] *= 0.5
    peak = np.abs(noise).max()
    step_peak = np.abs(np.diff(noise, axis=0)).max() if params.n_frames > 1 else 0.0
    limit_amp = noise_amp / peak if peak > 0 else 0.0
    limit_rate = (
        (_NOISE_RATE_FRACTION * params.sway_rate() / fps) / step_peak
        if step_peak > 0
        else 0.0
    )
    noise *= min(limit_amp, limit_rate) if noise_amp > 0 else 0.0

    deviation = sway + noise
    # triangle-inequality guard: scale deviations so base + deviation cannot
    # exceed the per-frame gap bound even where the lateral axis turns
    bound = params.speed_max / fps
    base_gaps = np.linalg.norm(np.diff(base, axis=0), axis=1)
    dev_gaps = np.linalg.norm(np.diff(deviation, axis=0), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        margins = np.where(dev_gaps > 0.0, (bound - base_gaps) / dev_gaps, np.inf)
    scale = min(1.0, float(margins.min())) if len(margins) else 1.0
    translations = base + scale * deviation

    pitch = _PITCH_TILT_RAD + _PITCH_AMPLITUDE_RAD * np.sin(
        2.0 * np.pi * params.sway_frequency_hz * t + phase[1]
    )
    rotations = quat_multiply(
        np.stack([np.cos(yaw / 2), np.zeros_like(yaw), np.zeros_like(yaw), np.sin(yaw / 2)], axis=1),
        np.stack([np.cos(pitch / 2), np.zeros_like(pitch), np.sin(pitch / 2), np.zeros_like(pitch)], axis=1),
    )
    return Trajectory(translations, rotations, fps)


def _format_row(frame: int, trans: np.ndarray, rot: np.ndarray) -> str:
    vals = [*trans, *rot]
    return ",".join([str(int(frame))] + [format(v, ".17g") for v in vals])


def write_trajectory_csv(path, traj: Trajectory) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for i in range(len(traj)):
            fh.write(_format_row(i, traj.translations[i], traj.rotations[i]) + "\n")


def write_observations_csv(path, obs: SparseObservations) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for i, frame in enumerate(obs.indices):
            fh.write(_format_row(frame, obs.translations[i], obs.rotations[i]) + "\n")


def _parse_pose_csv(path):
    """Shared row parsing: returns (frames, translations, rotations)."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n\r")
        if header != CSV_HEADER:
            raise MalformedHeader(f"{path}:1: expected header {CSV_HEADER!r}, got {header!r}")
        frames, trans, rots = [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 8:
                raise MalformedHeader(f"{path}:{lineno}: expected 8 columns, got {len(parts)}")
            try:
                frame = int(parts[0])
                vals = [float(p) for p in parts[1:]]
            except ValueError as exc:
                raise MalformedHeader(f"{path}:{lineno}: non-numeric field") from exc
            if not np.isfinite(vals).all():
                raise NonFiniteValue(f"{path}:{lineno}: non-finite value")
            norm = float(np.linalg.norm(vals[3:]))
            if abs(norm - 1.0) > QUAT_NORM_TOL:
                raise NonUnitQuaternion(
                    f"{path}:{lineno}: quaternion norm {norm:.6f} deviates from 1 "
                    f"by more than {QUAT_NORM_TOL}"
                )
            frames.append(frame)
            trans.append(vals[:3])
            rots.append(vals[3:])
    if not frames:
        raise MalformedHeader(f"{path}: no data rows")
    frames = np.asarray(frames, dtype=np.int64)
    if np.any(np.diff(frames) <= 0):
        raise MalformedHeader(f"{path}: frame indices must be strictly ascending")
    return frames, np.asarray(trans), np.asarray(rots)


def read_trajectory_csv(path, frame_rate_hint: float = 30.0) -> Trajectory:
    """Read a dense trajectory; frames must run 0..N-1 without holes.

    Slightly off-unit quaternions (within 1e-3) are renormalized silently;
    larger deviations are rejected. Rotations are hemisphere-aligned on read.
    """
    frames, trans, rots = _parse_pose_csv(path)
    if frames[0] != 0 or frames[-1] != len(frames) - 1:
        raise MalformedHeader(f"{path}: dense trajectory must cover frames 0..N-1")
    return Trajectory(trans, rots, frame_rate_hint)


def read_observations_csv(path, n_frames: int | None = None, frame_rate_hint: float = 30.0) -> SparseObservations:
    """Read sparse observations; the final frame fixes the length when
    n_frames is not given (our observation files always include it)."""
    frames, trans, rots = _parse_pose_csv(path)
    n = int(frames[-1]) + 1 if n_frames is None else n_frames
    return SparseObservations(frames, trans, rots, n, frame_rate_hint)


def scene_dir(root, scene_id: str) -> str:
    return os.path.join(root, scene_id)


def write_scene(root, scene_id: str, gt: Trajectory, strides=()) -> str:
    """Write gt.csv and obs_k<stride>.csv files under root/scene_id."""
    path = scene_dir(root, scene_id)
    os.makedirs(path, exist_ok=True)
    write_trajectory_csv(os.path.join(path, GT_FILENAME), gt)
    for k in strides:
        obs = subsample_observations(gt, ObservationSpec(int(k)))
        write_observations_csv(os.path.join(path, f"obs_k{int(k)}.csv"), obs)
    return path


def list_scenes(root) -> list[str]:
    if not os.path.isdir(root):
        raise FileNotFoundError(f"scene root {root!r} does not exist")
    out = []
    for name in sorted(os.listdir(root)):
        if os.path.isfile(os.path.join(root, name, GT_FILENAME)):
            out.append(name)
    return out
