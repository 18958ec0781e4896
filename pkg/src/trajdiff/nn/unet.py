"""A small 1-D U-Net over pose-sequence channels, with hand-written backprop.

Input is 15 channels: 7 noisy residual channels (3 translation + 4 rotation),
7 interpolation-baseline channels, and 1 observation mask. Two strided-conv
downsampling stages (so the bottleneck runs at a quarter of the frame rate),
nearest-neighbor upsampling with convolution on the way back up, skip
concatenation per level, GroupNorm + SiLU blocks, and a sinusoidal timestep
embedding injected per level through learned linear projections. Sequences
whose length is not a multiple of 4 are reflection-padded and cropped back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MissingForwardCache, ShapeMismatch
from . import layers as L


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int = 15
    out_channels: int = 7
    base_channels: int = 64
    kernel_size: int = 5
    groups: int = 8
    time_dim: int = 128
    time_base: float = 10000.0

    def __post_init__(self):
        if self.kernel_size % 2 != 1:
            raise ShapeMismatch("kernel_size must be odd")
        if self.time_dim % 2 != 0:
            raise ShapeMismatch("time_dim must be even")
        for c in self.level_channels():
            if c % self.groups != 0:
                raise ShapeMismatch(
                    f"channel width {c} not divisible by {self.groups} groups"
                )

    def level_channels(self) -> tuple[int, int, int]:
        return (self.base_channels, 2 * self.base_channels, 4 * self.base_channels)

    @property
    def bottleneck_channels(self) -> int:
        return self.level_channels()[2]


@dataclass
class UNetParams:
    """Named parameter tensors plus the architecture they belong to."""

    config: UNetConfig
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def param_count(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def copy(self) -> "UNetParams":
        return UNetParams(self.config, {k: v.copy() for k, v in self.tensors.items()})


def _conv_shape(c_out, c_in, k):
    return (c_out, c_in, k)


# The output projection starts small but not at zero: a zero head blocks
# every gradient upstream of it until the head itself has grown, which at
# short training budgets never happens (measured: 2 of 46 tensors receive
# gradient at step 0 with a zero head, all 46 at this scale).
OUT_HEAD_INIT_STD = 0.02


def init_params(config: UNetConfig, rng: np.random.Generator) -> UNetParams:
    """Fan-in-scaled normal init; the output projection starts near zero so
    an untrained model stays close to the identity-free denoiser."""
    c1, c2, c3 = config.level_channels()
    k = config.kernel_size
    d = config.time_dim
    shapes: dict[str, tuple] = {
        "time.fc1.w": (d, d),
        "time.fc1.b": (d,),
        "time.fc2.w": (d, d),
        "time.fc2.b": (d,),
        "in.conv.w": _conv_shape(c1, config.in_channels, k),
        "in.conv.b": (c1,),
        "enc1.conv.w": _conv_shape(c1, c1, k),
        "enc1.conv.b": (c1,),
        "enc1.gn.g": (c1,),
        "enc1.gn.b": (c1,),
        "enc1.temb.w": (c1, d),
        "enc1.temb.b": (c1,),
        "down1.conv.w": _conv_shape(c2, c1, k),
        "down1.conv.b": (c2,),
        "enc2.conv.w": _conv_shape(c2, c2, k),
        "enc2.conv.b": (c2,),
        "enc2.gn.g": (c2,),
        "enc2.gn.b": (c2,),
        "enc2.temb.w": (c2, d),
        "enc2.temb.b": (c2,),
        "down2.conv.w": _conv_shape(c3, c2, k),
        "down2.conv.b": (c3,),
        "mid.conv.w": _conv_shape(c3, c3, k),
        "mid.conv.b": (c3,),
        "mid.gn.g": (c3,),
        "mid.gn.b": (c3,),
        "mid.temb.w": (c3, d),
        "mid.temb.b": (c3,),
        "up1.conv.w": _conv_shape(c2, c3, k),
        "up1.conv.b": (c2,),
        "dec2.conv.w": _conv_shape(c2, 2 * c2, k),
        "dec2.conv.b": (c2,),
        "dec2.gn.g": (c2,),
        "dec2.gn.b": (c2,),
        "dec2.temb.w": (c2, d),
        "dec2.temb.b": (c2,),
        "up2.conv.w": _conv_shape(c1, c2, k),
        "up2.conv.b": (c1,),
        "dec1.conv.w": _conv_shape(c1, 2 * c1, k),
        "dec1.conv.b": (c1,),
        "dec1.gn.g": (c1,),
        "dec1.gn.b": (c1,),
        "dec1.temb.w": (c1, d),
        "dec1.temb.b": (c1,),
        "out.conv.w": _conv_shape(config.out_channels, c1, k),
        "out.conv.b": (config.out_channels,),
    }
    tensors: dict[str, np.ndarray] = {}
    for name, shape in shapes.items():
        if name.endswith(".b") and not name.endswith("gn.b"):
            tensors[name] = np.zeros(shape)
        elif name.endswith("gn.g"):
            tensors[name] = np.ones(shape)
        elif name.endswith("gn.b"):
            tensors[name] = np.zeros(shape)
        elif name.startswith("out."):
            tensors[name] = OUT_HEAD_INIT_STD * rng.standard_normal(shape)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else shape[0]
            tensors[name] = rng.standard_normal(shape) / np.sqrt(fan_in)
    return UNetParams(config, tensors)


def _block_forward(x, tau, p: dict, prefix: str, groups: int):
    """conv -> GroupNorm -> + time projection -> SiLU."""
    c, conv_cache = L.conv1d(x, p[f"{prefix}.conv.w"], p[f"{prefix}.conv.b"])
    g, gn_cache = L.group_norm(c, p[f"{prefix}.gn.g"], p[f"{prefix}.gn.b"], groups)
    tproj, t_cache = L.linear(tau, p[f"{prefix}.temb.w"], p[f"{prefix}.temb.b"])
    z = g + tproj[:, None]
    out, silu_cache = L.silu(z)
    return out, (conv_cache, gn_cache, t_cache, silu_cache)


def _block_backward(gout, cache, prefix: str, grads: dict):
    conv_cache, gn_cache, t_cache, silu_cache = cache
    gz = L.silu_backward(gout, silu_cache)
    gtau_vec = gz.sum(axis=1)
    gtau_in, gtw, gtb = L.linear_backward(gtau_vec, t_cache)
    grads[f"{prefix}.temb.w"] = grads.get(f"{prefix}.temb.w", 0.0) + gtw
    grads[f"{prefix}.temb.b"] = grads.get(f"{prefix}.temb.b", 0.0) + gtb
    gg, ggamma, gbeta = L.group_norm_backward(gz, gn_cache)
    grads[f"{prefix}.gn.g"] = grads.get(f"{prefix}.gn.g", 0.0) + ggamma
    grads[f"{prefix}.gn.b"] = grads.get(f"{prefix}.gn.b", 0.0) + gbeta
    gx, gw, gb = L.conv1d_backward(gg, conv_cache)
    grads[f"{prefix}.conv.w"] = grads.get(f"{prefix}.conv.w", 0.0) + gw
    grads[f"{prefix}.conv.b"] = grads.get(f"{prefix}.conv.b", 0.0) + gb
    return gx, gtau_in


def unet_forward(noisy_residual, baseline_cond, obs_mask, t, params: UNetParams):
    """Run the network; returns (prediction, bottleneck, cache).

    noisy_residual and baseline_cond are (7, N); obs_mask is (N,) or (1, N).
    The bottleneck activation (4 * base_channels, ceil(N/4)) feeds spatial
    feature export; cache feeds unet_backward.
    """
    cfg = params.config
    p = params.tensors
    noisy_residual = np.asarray(noisy_residual, dtype=np.float64)
    baseline_cond = np.asarray(baseline_cond, dtype=np.float64)
    mask = np.asarray(obs_mask, dtype=np.float64).reshape(1, -1)
    half = (cfg.in_channels - 1) // 2
    if noisy_residual.shape != (half, mask.shape[1]) or baseline_cond.shape != (
        half,
        mask.shape[1],
    ):
        raise ShapeMismatch(
            f"expected ({half}, N) residual/conditioning with matching mask, got "
            f"{noisy_residual.shape}, {baseline_cond.shape}, {mask.shape}"
        )
    if t < 1:
        raise ValueError(f"timestep must be >= 1, got {t}")
    x = np.concatenate([noisy_residual, baseline_cond, mask], axis=0)

    n = x.shape[1]
    extra = L.reflect_pad_width(n, 4)
    xp = L.reflect_pad(x, extra)

    se = L.sinusoidal_embedding(t, cfg.time_dim, cfg.time_base)
    h1, fc1_cache = L.linear(se, p["time.fc1.w"], p["time.fc1.b"])
    a1, silu_t_cache = L.silu(h1)
    tau, fc2_cache = L.linear(a1, p["time.fc2.w"], p["time.fc2.b"])

    h0, in_cache = L.conv1d(xp, p["in.conv.w"], p["in.conv.b"])
    e1, enc1_cache = _block_forward(h0, tau, p, "enc1", cfg.groups)
    d1, down1_cache = L.conv1d(e1, p["down1.conv.w"], p["down1.conv.b"], stride=2)
    e2, enc2_cache = _block_forward(d1, tau, p, "enc2", cfg.groups)
    d2, down2_cache = L.conv1d(e2, p["down2.conv.w"], p["down2.conv.b"], stride=2)
    mid, mid_cache = _block_forward(d2, tau, p, "mid", cfg.groups)

    u1, up1_factor = L.upsample_nearest(mid)
    u1c, up1_cache = L.conv1d(u1, p["up1.conv.w"], p["up1.conv.b"])
    cat2, split2 = L.concat_channels(u1c, e2)
    f2, dec2_cache = _block_forward(cat2, tau, p, "dec2", cfg.groups)

    u2, up2_factor = L.upsample_nearest(f2)
    u2c, up2_cache = L.conv1d(u2, p["up2.conv.w"], p["up2.conv.b"])
    cat1, split1 = L.concat_channels(u2c, e1)
    f1, dec1_cache = _block_forward(cat1, tau, p, "dec1", cfg.groups)

    yp, out_cache = L.conv1d(f1, p["out.conv.w"], p["out.conv.b"])
    y = yp[:, :n]

    cache = {
        "n": n,
        "fc1": fc1_cache,
        "silu_t": silu_t_cache,
        "fc2": fc2_cache,
        "in": in_cache,
        "enc1": enc1_cache,
        "down1": down1_cache,
        "enc2": enc2_cache,
        "down2": down2_cache,
        "mid": mid_cache,
        "up1_factor": up1_factor,
        "up1": up1_cache,
        "split2": split2,
        "dec2": dec2_cache,
        "up2_factor": up2_factor,
        "up2": up2_cache,
        "split1": split1,
        "dec1": dec1_cache,
        "out": out_cache,
    }
    return y, mid, cache


def unet_backward(grad_prediction, cache) -> dict[str, np.ndarray]:
    """Backpropagate d(loss)/d(prediction) through a cached forward pass.

    Returns gradients keyed like the parameter tensors. Gradients toward the
    network inputs are computed along the way but not returned; inputs are
    data, not parameters.
    """
    if not isinstance(cache, dict) or "out" not in cache:
        raise MissingForwardCache("unet_backward needs the cache from unet_forward")
    grad_prediction = np.asarray(grad_prediction, dtype=np.float64)
    n = cache["n"]
    grads: dict[str, np.ndarray] = {}

    padded_len = n + L.reflect_pad_width(n, 4)
    gy = np.zeros((grad_prediction.shape[0], padded_len))
    gy[:, :n] = grad_prediction

    gf1, gw, gb = L.conv1d_backward(gy, cache["out"])
    grads["out.conv.w"] = gw
    grads["out.conv.b"] = gb

    gcat1, gtau = _block_backward(gf1, cache["dec1"], "dec1", grads)
    gu2c, ge1_skip = L.concat_channels_backward(gcat1, cache["split1"])
    gu2, gw, gb = L.conv1d_backward(gu2c, cache["up2"])
    grads["up2.conv.w"] = gw
    grads["up2.conv.b"] = gb
    gf2 = L.upsample_nearest_backward(gu2, cache["up2_factor"])

    gcat2, gtau2 = _block_backward(gf2, cache["dec2"], "dec2", grads)
    gtau += gtau2
    gu1c, ge2_skip = L.concat_channels_backward(gcat2, cache["split2"])
    gu1, gw, gb = L.conv1d_backward(gu1c, cache["up1"])
    grads["up1.conv.w"] = gw
    grads["up1.conv.b"] = gb
    gmid = L.upsample_nearest_backward(gu1, cache["up1_factor"])

    gd2, gtau3 = _block_backward(gmid, cache["mid"], "mid", grads)
    gtau += gtau3
    ge2, gw, gb = L.conv1d_backward(gd2, cache["down2"])
    grads["down2.conv.w"] = gw
    grads["down2.conv.b"] = gb
    ge2 += ge2_skip

    gd1, gtau4 = _block_backward(ge2, cache["enc2"], "enc2", grads)
    gtau += gtau4
    ge1, gw, gb = L.conv1d_backward(gd1, cache["down1"])
    grads["down1.conv.w"] = gw
    grads["down1.conv.b"] = gb
    ge1 += ge1_skip

    gh0, gtau5 = _block_backward(ge1, cache["enc1"], "enc1", grads)
    gtau += gtau5
    _, gw, gb = L.conv1d_backward(gh0, cache["in"])
    grads["in.conv.w"] = gw
    grads["in.conv.b"] = gb

    ga1, gw, gb = L.linear_backward(gtau, cache["fc2"])
    grads["time.fc2.w"] = gw
    grads["time.fc2.b"] = gb
    gh1 = L.silu_backward(ga1, cache["silu_t"])
    _, gw, gb = L.linear_backward(gh1, cache["fc1"])
    grads["time.fc1.w"] = gw
    grads["time.fc1.b"] = gb
    return grads


def params_to_tensors(params: UNetParams) -> dict[str, np.ndarray]:
    """Flatten params plus architecture scalars for checkpointing."""
    cfg = params.config
    out = {
        "meta.in_channels": np.asarray(float(cfg.in_channels)),
        "meta.out_channels": np.asarray(float(cfg.out_channels)),
        "meta.base_channels": np.asarray(float(cfg.base_channels)),
        "meta.kernel_size": np.asarray(float(cfg.kernel_size)),
        "meta.groups": np.asarray(float(cfg.groups)),
        "meta.time_dim": np.asarray(float(cfg.time_dim)),
        "meta.time_base": np.asarray(float(cfg.time_base)),
    }
    for name, arr in params.tensors.items():
        out[f"param.{name}"] = arr
    return out


def params_from_tensors(tensors: dict[str, np.ndarray]) -> UNetParams:
    cfg = UNetConfig(
        in_channels=int(tensors["meta.in_channels"]),
        out_channels=int(tensors["meta.out_channels"]),
        base_channels=int(tensors["meta.base_channels"]),
        kernel_size=int(tensors["meta.kernel_size"]),
        groups=int(tensors["meta.groups"]),
        time_dim=int(tensors["meta.time_dim"]),
        time_base=float(tensors["meta.time_base"]),
    )
    params = {
        name[len("param.") :]: np.array(arr)
        for name, arr in tensors.items()
        if name.startswith("param.")
    }
    return UNetParams(cfg, params)
