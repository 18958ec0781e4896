"""Pose and quaternion primitives.

Quaternions are plain float64 arrays in (w, x, y, z) order, everywhere,
including on disk. q and -q encode the same rotation; all distances here are
invariant to that sign, and pose sequences are hemisphere-aligned (consecutive
dot products >= 0) on construction so residual arithmetic in 4-space stays
continuous.

Most functions accept a single quaternion of shape (4,) or a batch (..., 4)
and broadcast over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ZeroNormQuaternion

ZERO_NORM_EPS = 1e-12
# below this 4-space angle slerp degrades to normalized lerp
SLERP_ANGLE_EPS = 1e-6

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Scale raw 4-vectors onto the unit sphere, preserving direction.

    Vectors already unit within 1e-12 pass through bit-identically, which
    makes normalization idempotent and keeps read/write round trips exact.
    """
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm <= ZERO_NORM_EPS):
        raise ZeroNormQuaternion(
            f"quaternion norm {float(norm.min()):.3e} <= {ZERO_NORM_EPS:.0e}"
        )
    if np.all(np.abs(norm - 1.0) <= 1e-12):
        return q.copy() if q.base is not None else q
    return q / np.where(np.abs(norm - 1.0) <= 1e-12, 1.0, norm)


def hemisphere_signs(quats: np.ndarray) -> np.ndarray:
    """Signs (+-1) that flip each quaternion into its predecessor's hemisphere.

    The first sign is +1; a sign flips whenever the running dot product with
    the previous (already flipped) rotation would go negative. Zero dots keep
    the current sign.
    """
    quats = np.asarray(quats, dtype=np.float64)
    if quats.ndim != 2 or quats.shape[1] != 4:
        raise ValueError(f"expected (N, 4) quaternion array, got {quats.shape}")
    dots = np.sum(quats[1:] * quats[:-1], axis=1)
    signs = np.ones(len(quats))
    signs[1:] = np.cumprod(np.where(dots < 0.0, -1.0, 1.0))
    return signs


def hemisphere_align(quats: np.ndarray) -> np.ndarray:
    """Flip signs along a rotation sequence so consecutive dots are >= 0."""
    quats = np.asarray(quats, dtype=np.float64)
    return quats * hemisphere_signs(quats)[:, None]


def quat_multiply(q0: np.ndarray, q1: np.ndarray) -> np.ndarray:
    """Hamilton product q0 * q1 (applies q1's rotation first)."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    w0, x0, y0, z0 = np.moveaxis(q0, -1, 0)
    w1, x1, y1, z1 = np.moveaxis(q1, -1, 0)
    return np.stack(
        [
            w0 * w1 - x0 * x1 - y0 * y1 - z0 * z1,
            w0 * x1 + x0 * w1 + y0 * z1 - z0 * y1,
            w0 * y1 - x0 * z1 + y0 * w1 + z0 * x1,
            w0 * z1 + x0 * y1 - y0 * x1 + z0 * w1,
        ],
        axis=-1,
    )


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if norm <= ZERO_NORM_EPS:
        raise ZeroNormQuaternion("rotation axis has near-zero norm")
    half = 0.5 * float(angle)
    out = np.empty(4)
    out[0] = np.cos(half)
    out[1:] = np.sin(half) * (axis / norm)
    return out


def geodesic_distance(q0: np.ndarray, q1: np.ndarray) -> np.ndarray | float:
    """Rotation angle in radians between unit quaternions, in [0, pi].

    Sign-invariant 2 * arccos(|<q0, q1>|), evaluated through the chord length
    (4 * arcsin(min(|q0 - q1|, |q0 + q1|) / 2)): identical in exact arithmetic
    but well conditioned near coincidence, where arccos of a rounded dot
    product has a noise floor around 1e-8 rad.
    """
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    d_minus = np.linalg.norm(q0 - q1, axis=-1)
    d_plus = np.linalg.norm(q0 + q1, axis=-1)
    half_chord = 0.5 * np.minimum(d_minus, d_plus)
    out = 4.0 * np.arcsin(np.clip(half_chord, 0.0, 1.0))
    return float(out) if out.ndim == 0 else out


def quaternion_distance(q0: np.ndarray, q1: np.ndarray) -> np.ndarray | float:
    """Sign-invariant Euclidean distance min(|q0 - q1|, |q0 + q1|)."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    d_minus = np.linalg.norm(q0 - q1, axis=-1)
    d_plus = np.linalg.norm(q0 + q1, axis=-1)
    out = np.minimum(d_minus, d_plus)
    return float(out) if out.ndim == 0 else out


def slerp(q0: np.ndarray, q1: np.ndarray, t) -> np.ndarray:
    """Spherical interpolation between two unit quaternions.

    q1 is flipped to q0's hemisphere first, so interpolation always takes the
    shorter arc. t may be a scalar or an array; an array yields (len(t), 4).
    Falls back to normalized lerp when the 4-space angle drops below
    SLERP_ANGLE_EPS. t=0 and t=1 return the (flipped) endpoints exactly.
    """
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    if np.dot(q0, q1) < 0.0:
        q1 = -q1
    t_arr = np.asarray(t, dtype=np.float64)
    out = slerp_arc(
        np.broadcast_to(q0, t_arr.shape + (4,)),
        np.broadcast_to(q1, t_arr.shape + (4,)),
        t_arr,
    )
    return out


def slerp_arc(q0: np.ndarray, q1: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Batched slerp without hemisphere flipping.

    Interpolates along the arc exactly as given; callers are expected to pass
    hemisphere-consistent pairs when they want the shorter path. Shapes:
    q0, q1 (..., 4), t (...,).
    """
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    dots = np.clip(np.sum(q0 * q1, axis=-1), -1.0, 1.0)
    omega = np.arccos(dots)
    small = omega < SLERP_ANGLE_EPS
    sin_omega = np.where(small, 1.0, np.sin(omega))
    c0 = np.where(small, 1.0 - t, np.sin((1.0 - t) * omega) / sin_omega)
    c1 = np.where(small, t, np.sin(t * omega) / sin_omega)
    out = c0[..., None] * q0 + c1[..., None] * q1
    if np.any(small):
        norm = np.linalg.norm(out, axis=-1, keepdims=True)
        out = np.where(small[..., None], out / np.maximum(norm, ZERO_NORM_EPS), out)
    return out


def slerp_arc_with_grad(q0: np.ndarray, q1: np.ndarray, t: np.ndarray):
    """slerp_arc plus Jacobians of the output wrt both input quaternions.

    Returns (out, j0, j1) with j0[..., a, b] = d out_a / d q0_b. The Jacobians
    are those of the analytic formula with the interpolation parameter held
    fixed; the lerp fallback branch differentiates through its normalization.
    Inputs are treated as ambient 4-vectors (expected near-unit).
    """
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    dots_raw = np.sum(q0 * q1, axis=-1)
    dots = np.clip(dots_raw, -1.0, 1.0)
    omega = np.arccos(dots)
    small = omega < SLERP_ANGLE_EPS

    eye = np.eye(4)

    # spherical branch
    sin_omega = np.where(small, 1.0, np.sin(omega))
    cos_omega = np.cos(omega)
    s0 = np.sin((1.0 - t) * omega)
    s1 = np.sin(t * omega)
    c0 = np.where(small, 1.0 - t, s0 / sin_omega)
    c1 = np.where(small, t, s1 / sin_omega)
    out_sph = c0[..., None] * q0 + c1[..., None] * q1
    # d c / d omega
    inv_sin2 = np.where(small, 0.0, 1.0 / (sin_omega * sin_omega))
    dc0 = ((1.0 - t) * np.cos((1.0 - t) * omega) * sin_omega - s0 * cos_omega) * inv_sin2
    dc1 = (t * np.cos(t * omega) * sin_omega - s1 * cos_omega) * inv_sin2
    # d omega / d dot; saturated dots (clip active) get zero slope
    interior = (np.abs(dots_raw) < 1.0) & ~small
    domega = np.where(interior, -1.0 / np.sqrt(np.maximum(1.0 - dots * dots, 1e-300)), 0.0)
    dout_domega = dc0[..., None] * q0 + dc1[..., None] * q1
    # j = c * I + (dout/domega) (domega/ddot) outer (ddot/dq)
    j0_sph = c0[..., None, None] * eye + np.einsum(
        "...a,...b->...ab", dout_domega * domega[..., None], q1
    )
    j1_sph = c1[..., None, None] * eye + np.einsum(
        "...a,...b->...ab", dout_domega * domega[..., None], q0
    )

    if not np.any(small):
        return out_sph, j0_sph, j1_sph

    # lerp fallback branch: normalize((1 - t) q0 + t q1)
    v = (1.0 - t)[..., None] * q0 + t[..., None] * q1
    vnorm = np.maximum(np.linalg.norm(v, axis=-1, keepdims=True), ZERO_NORM_EPS)
    n = v / vnorm
    j_norm = (eye - np.einsum("...a,...b->...ab", n, n)) / vnorm[..., None]
    out = np.where(small[..., None], n, out_sph)
    j0 = np.where(small[..., None, None], (1.0 - t)[..., None, None] * j_norm, j0_sph)
    j1 = np.where(small[..., None, None], t[..., None, None] * j_norm, j1_sph)
    return out, j0, j1


class Pose(NamedTuple):
    translation: np.ndarray  # (3,) meters
    rotation: np.ndarray  # (4,) unit quaternion (w, x, y, z)


@dataclass(frozen=True)
class Trajectory:
    """A camera path: one pose per frame at a nominal frame rate.

    Construction copies the inputs, renormalizes rotations, and
    hemisphere-aligns them. Arrays are frozen (read-only views); derive new
    trajectories instead of mutating.
    """

    translations: np.ndarray  # (N, 3) meters
    rotations: np.ndarray  # (N, 4) unit quaternions, hemisphere-aligned
    frame_rate_hint: float = 30.0

    def __post_init__(self):
        trans = np.array(self.translations, dtype=np.float64)
        rots = np.array(self.rotations, dtype=np.float64)
        if trans.ndim != 2 or trans.shape[1] != 3:
            raise ValueError(f"translations must be (N, 3), got {trans.shape}")
        if rots.shape != (trans.shape[0], 4):
            raise ValueError(
                f"rotations must be ({trans.shape[0]}, 4), got {rots.shape}"
            )
        if len(trans) < 2:
            raise ValueError("a trajectory needs at least 2 frames")
        if not (np.isfinite(trans).all() and np.isfinite(rots).all()):
            raise ValueError("trajectory contains non-finite values")
        if self.frame_rate_hint <= 0.0:
            raise ValueError("frame_rate_hint must be positive")
        rots = hemisphere_align(quat_normalize(rots))
        trans.setflags(write=False)
        rots.setflags(write=False)
        object.__setattr__(self, "translations", trans)
        object.__setattr__(self, "rotations", rots)

    def __len__(self) -> int:
        return len(self.translations)

    def __getitem__(self, i: int) -> Pose:
        return Pose(self.translations[i], self.rotations[i])

    def with_translations(self, translations: np.ndarray) -> "Trajectory":
        return Trajectory(translations, self.rotations, self.frame_rate_hint)
