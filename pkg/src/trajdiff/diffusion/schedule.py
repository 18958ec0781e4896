"""Variance schedules for the residual denoiser.

Timesteps are 1-based (t in [1, T]); arrays are 0-indexed, so beta[t-1] is
the variance added at step t. The posterior uses the convention
alpha_bar_0 := 1, which makes step t=1 deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidSteps

SCHEDULE_KINDS = ("linear", "cosine")
LINEAR_BETA_START = 1e-4
LINEAR_BETA_END = 2e-2
COSINE_OFFSET = 0.008
BETA_MAX = 0.999


@dataclass(frozen=True)
class NoiseSchedule:
    kind: str
    t_diff: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    one_minus_alpha_bar: np.ndarray
    posterior_variance: np.ndarray
    posterior_coef_x0: np.ndarray
    posterior_coef_xt: np.ndarray

    @classmethod
    def from_beta(cls, beta: np.ndarray, kind: str = "custom") -> "NoiseSchedule":
        beta = np.asarray(beta, dtype=np.float64)
        if beta.ndim != 1 or beta.size < 1:
            raise InvalidSteps(f"beta must be a non-empty vector, got shape {beta.shape}")
        if np.any(beta <= 0.0) or np.any(beta >= 1.0):
            raise InvalidSteps("every beta must lie strictly inside (0, 1)")
        alpha = 1.0 - beta
        alpha_bar = np.cumprod(alpha)
        # 1 - alpha_bar via the recurrence beta_t + alpha_t * (1 - alpha_bar_{t-1});
        # computing it as 1 - cumprod cancels catastrophically at small t, which
        # would leave the t=1 posterior step multiplying by 1 + O(1e-13) instead
        # of exactly 1
        one_minus = np.empty_like(beta)
        acc = 0.0
        for i in range(beta.size):
            acc = beta[i] + alpha[i] * acc
            one_minus[i] = acc
        # previous-step cumulative products with the alpha_bar_0 := 1 convention
        alpha_bar_prev = np.concatenate([[1.0], alpha_bar[:-1]])
        one_minus_prev = np.concatenate([[0.0], one_minus[:-1]])
        post_var = beta * one_minus_prev / one_minus
        coef_x0 = np.sqrt(alpha_bar_prev) * beta / one_minus
        coef_xt = np.sqrt(alpha) * one_minus_prev / one_minus
        return cls(kind, beta.size, beta, alpha, alpha_bar, one_minus, post_var,
                   coef_x0, coef_xt)

    def sqrt_alpha_bar(self, t: int) -> float:
        return float(np.sqrt(self.alpha_bar[t - 1]))

    def sqrt_one_minus_alpha_bar(self, t: int) -> float:
        return float(np.sqrt(self.one_minus_alpha_bar[t - 1]))


def make_schedule(t_diff: int, kind: str = "cosine") -> NoiseSchedule:
    """Build a linear or squared-cosine schedule of t_diff steps."""
    if int(t_diff) != t_diff or t_diff < 2:
        raise InvalidSteps(f"need at least 2 steps, got {t_diff}")
    t_diff = int(t_diff)
    if kind == "linear":
        beta = np.linspace(LINEAR_BETA_START, LINEAR_BETA_END, t_diff)
    elif kind == "cosine":
        grid = np.arange(t_diff + 1) / t_diff
        f = np.cos((grid + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * np.pi / 2.0) ** 2
        abar = f / f[0]
        beta = 1.0 - abar[1:] / abar[:-1]
        # clamp, then recompute cumulative products from the clamped betas so
        # the stored alpha_bar stays consistent with beta
        beta = np.clip(beta, 1e-8, BETA_MAX)
    else:
        raise InvalidSteps(f"unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")
    return NoiseSchedule.from_beta(beta, kind)
