"""Interpolation baselines: Catmull-Rom splines, densification, resampling.

Knots live on the frame-index axis, so a 15-frame gap between observations
spans three times the parameter range of a 5-frame gap. Tangents follow the
uniform Catmull-Rom rule (centered difference over the two neighboring knots);
duplicated endpoint knots reduce the boundary tangents to one-sided difference
quotients, which keeps a two-observation segment exactly linear in time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, TooFewObservations
from .geometry import Trajectory, hemisphere_align, quat_normalize, slerp_arc

BASELINE_MODES = ("catmull_rom", "linear")
DEGENERATE_LENGTH_EPS = 1e-12


@dataclass(frozen=True)
class SparseObservations:
    """Known poses at a strict subset of frame indices."""

    indices: np.ndarray  # (M,) int64, strictly increasing, in [0, n_frames)
    translations: np.ndarray  # (M, 3)
    rotations: np.ndarray  # (M, 4) unit, hemisphere-aligned
    n_frames: int
    frame_rate_hint: float = 30.0

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        trans = np.array(self.translations, dtype=np.float64)
        rots = np.array(self.rotations, dtype=np.float64)
        if idx.ndim != 1 or len(idx) < 2:
            raise TooFewObservations(f"need >= 2 observations, got {idx.size}")
        if np.any(idx < 0) or np.any(idx >= self.n_frames):
            raise IndexOutOfRange(
                f"observation indices must lie in [0, {self.n_frames})"
            )
        if np.any(np.diff(idx) <= 0):
            raise ValueError("observation indices must be strictly increasing")
        if trans.shape != (len(idx), 3) or rots.shape != (len(idx), 4):
            raise ValueError("observation arrays disagree on length")
        if not (np.isfinite(trans).all() and np.isfinite(rots).all()):
            raise ValueError("observations contain non-finite values")
        rots = hemisphere_align(quat_normalize(rots))
        for arr in (idx, trans, rots):
            arr.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "translations", trans)
        object.__setattr__(self, "rotations", rots)

    def __len__(self) -> int:
        return len(self.indices)

    @classmethod
    def from_trajectory(cls, traj: Trajectory, indices) -> "SparseObservations":
        idx = np.asarray(indices, dtype=np.int64)
        if np.any(idx < 0) or np.any(idx >= len(traj)):
            raise IndexOutOfRange(f"indices must lie in [0, {len(traj)})")
        return cls(
            idx,
            traj.translations[idx],
            traj.rotations[idx],
            len(traj),
            traj.frame_rate_hint,
        )


@dataclass(frozen=True)
class CubicSegment:
    """One cubic span a*u^3 + b*u^2 + c*u + d on u in [0, 1], plus endpoint
    rotations and the frame-index interval it covers."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    rot_start: np.ndarray
    rot_end: np.ndarray
    frame_start: float
    frame_end: float


@dataclass(frozen=True)
class DensePolyline:
    """Dense samples along a spline with cumulative arc length per point."""

    translations: np.ndarray  # (P, 3)
    rotations: np.ndarray  # (P, 4)
    cumulative_length: np.ndarray  # (P,) non-decreasing, starts at 0
    segment_index: np.ndarray  # (P,) int64 source segment per point

    @property
    def total_length(self) -> float:
        return float(self.cumulative_length[-1])


@dataclass(frozen=True)
class ResampledPath:
    """Arc-length-uniform samples plus the lookup plan that produced them.

    step_index/step_weight record, for each output point, the dense step it
    interpolates and the blend weight toward the step's right end. Degenerate
    (near-zero-length) inputs yield copies of the first pose and a flag.
    """

    translations: np.ndarray  # (K, 3)
    rotations: np.ndarray  # (K, 4)
    step_index: np.ndarray  # (K,) int64 left dense point per output
    step_weight: np.ndarray  # (K,) in [0, 1]
    degenerate: bool


def _tangents(points: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Knot-space derivatives: centered differences, one-sided at the ends."""
    m = np.empty_like(points)
    m[0] = (points[1] - points[0]) / (knots[1] - knots[0])
    m[-1] = (points[-1] - points[-2]) / (knots[-1] - knots[-2])
    if len(points) > 2:
        m[1:-1] = (points[2:] - points[:-2]) / (knots[2:] - knots[:-2])[:, None]
    return m


def _segment_coefficients(points: np.ndarray, knots: np.ndarray):
    """Cubic coefficients (S, 3) per span, from Hermite form on unit u."""
    m = _tangents(points, knots)
    h = np.diff(knots)[:, None]
    p0, p1 = points[:-1], points[1:]
    v0, v1 = h * m[:-1], h * m[1:]
    a = 2.0 * p0 - 2.0 * p1 + v0 + v1
    b = -3.0 * p0 + 3.0 * p1 - 2.0 * v0 - v1
    c = v0
    d = p0
    return a, b, c, d


def catmull_rom_segments(obs: SparseObservations) -> list[CubicSegment]:
    knots = obs.indices.astype(np.float64)
    a, b, c, d = _segment_coefficients(obs.translations, knots)
    return [
        CubicSegment(
            a[i],
            b[i],
            c[i],
            d[i],
            obs.rotations[i],
            obs.rotations[i + 1],
            float(obs.indices[i]),
            float(obs.indices[i + 1]),
        )
        for i in range(len(obs) - 1)
    ]


def eval_cubic_horner(segment: CubicSegment, u: float) -> np.ndarray:
    """Evaluate one cubic span at u via Horner: 3 multiplies per component."""
    u = float(u)
    return ((segment.a * u + segment.b) * u + segment.c) * u + segment.d


def _horner_many(a, b, c, d, u):
    """Vectorized Horner; coefficient arrays (..., 3) against u (...)."""
    uu = np.asarray(u, dtype=np.float64)[..., None]
    return ((a * uu + b) * uu + c) * uu + d


def build_baseline(obs: SparseObservations, mode: str = "catmull_rom") -> Trajectory:
    """Interpolate observations into a full-length trajectory.

    catmull_rom: cubic translations with SLERP rotations per span. linear:
    piecewise-linear translations with renormalized-lerp rotations. Observed
    frames are copied from the observations verbatim; frames outside the
    observed range (possible when endpoints are unobserved) hold the nearest
    observed pose.
    """
    if mode not in BASELINE_MODES:
        raise ValueError(f"mode must be one of {BASELINE_MODES}, got {mode!r}")
    n = obs.n_frames
    knots = obs.indices.astype(np.float64)
    frames = np.arange(n, dtype=np.float64)
    seg = np.clip(np.searchsorted(obs.indices, frames, side="right") - 1, 0, len(obs) - 2)
    h = knots[seg + 1] - knots[seg]
    u = np.clip((frames - knots[seg]) / h, 0.0, 1.0)

    if mode == "catmull_rom":
        a, b, c, d = _segment_coefficients(obs.translations, knots)
        trans = _horner_many(a[seg], b[seg], c[seg], d[seg], u)
        rots = slerp_arc(obs.rotations[seg], obs.rotations[seg + 1], u)
    else:
        p0, p1 = obs.translations[seg], obs.translations[seg + 1]
        trans = p0 + u[:, None] * (p1 - p0)
        q = (1.0 - u[:, None]) * obs.rotations[seg] + u[:, None] * obs.rotations[seg + 1]
        rots = quat_normalize(q)

    trans[obs.indices] = obs.translations
    rots[obs.indices] = obs.rotations
    return Trajectory(trans, rots, obs.frame_rate_hint)


def _as_segment_arrays(source):
    """Coerce a Trajectory or a list of CubicSegment into coefficient arrays."""
    if isinstance(source, Trajectory):
        knots = np.arange(len(source), dtype=np.float64)
        a, b, c, d = _segment_coefficients(source.translations, knots)
        q0 = source.rotations[:-1]
        q1 = source.rotations[1:]
    else:
        segments = list(source)
        if not segments:
            raise ValueError("no segments to densify")
        a = np.stack([s.a for s in segments])
        b = np.stack([s.b for s in segments])
        c = np.stack([s.c for s in segments])
        d = np.stack([s.d for s in segments])
        q0 = np.stack([s.rot_start for s in segments])
        q1 = np.stack([s.rot_end for s in segments])
    return a, b, c, d, q0, q1


def densify(source, n_per_segment: int = 64) -> DensePolyline:
    """Sample every segment at n uniform u values and chain the results.

    Source is a Trajectory (one span per consecutive pose pair) or a list of
    CubicSegment. Segment junctions appear twice; the duplicate contributes
    zero arc length. Rotations are slerped within each span.
    """
    if n_per_segment < 2:
        raise ValueError("n_per_segment must be >= 2")
    a, b, c, d, q0, q1 = _as_segment_arrays(source)
    n_seg = len(a)
    u = np.linspace(0.0, 1.0, n_per_segment)
    trans = _horner_many(
        a[:, None, :], b[:, None, :], c[:, None, :], d[:, None, :], u[None, :]
    ).reshape(-1, 3)
    rots = slerp_arc(
        np.broadcast_to(q0[:, None, :], (n_seg, n_per_segment, 4)),
        np.broadcast_to(q1[:, None, :], (n_seg, n_per_segment, 4)),
        np.broadcast_to(u[None, :], (n_seg, n_per_segment)),
    ).reshape(-1, 4)
    steps = np.linalg.norm(np.diff(trans, axis=0), axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(steps)])
    seg_idx = np.repeat(np.arange(n_seg, dtype=np.int64), n_per_segment)
    return DensePolyline(trans, rots, cumulative, seg_idx)


def arc_length_resample(poly: DensePolyline, n_eval: int) -> ResampledPath:
    """Pick n_eval poses at uniform arc-length targets k * L / (n_eval - 1).

    Lower-bound lookup into the cumulative length, linear interpolation for
    the translation and SLERP for the rotation inside the chosen step. A
    near-zero total length returns copies of the first pose, flagged.
    """
    if n_eval < 2:
        raise ValueError("n_eval must be >= 2")
    cum = poly.cumulative_length
    total = float(cum[-1])
    if total < DEGENERATE_LENGTH_EPS:
        idx = np.zeros(n_eval, dtype=np.int64)
        w = np.zeros(n_eval)
        return ResampledPath(
            np.repeat(poly.translations[:1], n_eval, axis=0),
            np.repeat(poly.rotations[:1], n_eval, axis=0),
            idx,
            w,
            True,
        )
    targets = np.linspace(0.0, total, n_eval)
    right = np.clip(np.searchsorted(cum, targets, side="left"), 1, len(cum) - 1)
    left = right - 1
    step = cum[right] - cum[left]
    w = np.where(step > 0.0, (targets - cum[left]) / np.where(step > 0.0, step, 1.0), 0.0)
    trans = (1.0 - w[:, None]) * poly.translations[left] + w[:, None] * poly.translations[
        right
    ]
    rots = slerp_arc(poly.rotations[left], poly.rotations[right], w)
    return ResampledPath(trans, rots, left, w, False)
