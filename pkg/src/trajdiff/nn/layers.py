"""Differentiable layers as forward/backward function pairs.

Every forward returns (output, cache); the matching backward consumes the
upstream gradient plus that cache and returns gradients for its inputs and
parameters. Unless noted, activations are float64 arrays shaped
(channels, timesteps); no framework, no tape, callers wire the chain rule.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import ShapeMismatch


def conv1d(x, w, b, stride=1, pad=None):
    """Cross-correlation with circular (wrap) padding; pad defaults to
    (k-1)//2 so stride-1 output keeps the input length.

    Wrap padding keeps the net translation-covariant along time: circularly
    shifting the input by a multiple of the total stride shifts the output
    the same way, with no boundary seam to contaminate interior frames.
    """
    if x.ndim != 2 or w.ndim != 3 or x.shape[0] != w.shape[1]:
        raise ShapeMismatch(f"conv1d shapes x{x.shape} w{w.shape}")
    if pad is None:
        pad = (w.shape[2] - 1) // 2
    t = x.shape[1]
    if pad > t:
        raise ShapeMismatch(f"wrap padding {pad} exceeds length {t}")
    if pad:
        xw = np.concatenate([x[:, t - pad :], x, x[:, :pad]], axis=1)
    else:
        xw = x
    y = kernels.conv1d_forward(
        np.ascontiguousarray(xw), np.ascontiguousarray(w), b, stride, 0
    )
    return y, (xw, w, stride, pad, t)


def conv1d_backward(gy, cache):
    xw, w, stride, pad, t = cache
    gy = np.ascontiguousarray(gy)
    gxw = kernels.conv1d_input_grad(
        gy, np.ascontiguousarray(w), stride, 0, xw.shape[1]
    )
    gw, gb = kernels.conv1d_param_grad(
        gy, np.ascontiguousarray(xw), stride, 0, w.shape[2]
    )
    if pad:
        gx = gxw[:, pad : pad + t].copy()
        gx[:, t - pad :] += gxw[:, :pad]
        gx[:, :pad] += gxw[:, pad + t :]
    else:
        gx = gxw
    return gx, gw, gb


def group_norm(x, gamma, beta, groups, eps=1e-5):
    """Normalize over (channels_in_group, time); affine per channel."""
    c, t = x.shape
    if c % groups != 0:
        raise ShapeMismatch(f"{c} channels not divisible into {groups} groups")
    xg = x.reshape(groups, c // groups, t)
    mean = xg.mean(axis=(1, 2), keepdims=True)
    var = xg.var(axis=(1, 2), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mean) * inv_std).reshape(c, t)
    y = gamma[:, None] * xhat + beta[:, None]
    return y, (xhat, inv_std, gamma, groups)


def group_norm_backward(gy, cache):
    xhat, inv_std, gamma, groups = cache
    c, t = gy.shape
    ggamma = (gy * xhat).sum(axis=1)
    gbeta = gy.sum(axis=1)
    gxhat = (gy * gamma[:, None]).reshape(groups, c // groups, t)
    xhat_g = xhat.reshape(groups, c // groups, t)
    size = (c // groups) * t
    dot = (gxhat * xhat_g).sum(axis=(1, 2), keepdims=True)
    total = gxhat.sum(axis=(1, 2), keepdims=True)
    gx = inv_std * (gxhat - total / size - xhat_g * dot / size)
    return gx.reshape(c, t), ggamma, gbeta


def silu(x):
    sig = 1.0 / (1.0 + np.exp(-x))
    return x * sig, (x, sig)


def silu_backward(gy, cache):
    x, sig = cache
    return gy * sig * (1.0 + x * (1.0 - sig))


def linear(x, w, b):
    """Dense layer on a vector: y = w @ x + b with w shaped (out, in)."""
    return w @ x + b, (x, w)


def linear_backward(gy, cache):
    x, w = cache
    return w.T @ gy, np.outer(gy, x), gy.copy()


def upsample_nearest(x, factor=2):
    return np.repeat(x, factor, axis=1), factor


def upsample_nearest_backward(gy, factor):
    c, t = gy.shape
    return gy.reshape(c, t // factor, factor).sum(axis=2)


def concat_channels(a, b):
    return np.concatenate([a, b], axis=0), a.shape[0]


def concat_channels_backward(gy, split):
    return gy[:split], gy[split:]


def reflect_pad_width(t: int, multiple: int) -> int:
    return (-t) % multiple


def reflect_pad(x, extra: int):
    """Append `extra` reflected columns so strided stages divide evenly."""
    if extra == 0:
        return x
    if extra > x.shape[1] - 1:
        raise ShapeMismatch(f"cannot reflect-pad {extra} columns onto length {x.shape[1]}")
    return np.concatenate([x, x[:, -2 : -2 - extra : -1]], axis=1)


def reflect_pad_backward(gy, t: int):
    """Fold gradients from reflected columns back onto their sources."""
    extra = gy.shape[1] - t
    if extra == 0:
        return gy
    gx = gy[:, :t].copy()
    for j in range(extra):
        gx[:, t - 2 - j] += gy[:, t + j]
    return gx


def sinusoidal_embedding(t: float, dim: int, base: float = 10000.0) -> np.ndarray:
    """Fixed sin/cos position features of a scalar timestep."""
    if dim % 2 != 0:
        raise ShapeMismatch(f"embedding dim must be even, got {dim}")
    half = dim // 2
    freqs = np.exp(-np.log(base) * np.arange(half) / max(half - 1, 1))
    angles = float(t) * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)])
