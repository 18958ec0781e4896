"""Central-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np


def grad_check(fn, params: dict[str, np.ndarray], step: float = 1e-5,
               max_entries_per_tensor: int | None = None,
               rng: np.random.Generator | None = None):
    """Compare analytic gradients against central differences.

    fn(params) must return (loss, grads) where grads maps parameter names to
    arrays shaped like the parameters. Returns a dict name -> max relative
    error over the checked entries. Relative error uses
    |analytic - fd| / max(|analytic|, |fd|, 1e-6) so zero gradients compare
    on an absolute scale.
    """
    _, grads = fn(params)
    report: dict[str, float] = {}
    for name, tensor in params.items():
        if name not in grads:
            continue
        analytic = np.asarray(grads[name], dtype=np.float64)
        if analytic.shape != tensor.shape:
            analytic = np.broadcast_to(analytic, tensor.shape)
        flat_idx = np.arange(tensor.size)
        if max_entries_per_tensor is not None and tensor.size > max_entries_per_tensor:
            gen = rng if rng is not None else np.random.default_rng(0)
            flat_idx = gen.choice(tensor.size, size=max_entries_per_tensor,
                                  replace=False)
        worst = 0.0
        flat = tensor.reshape(-1)
        for idx in flat_idx:
            orig = flat[idx]
            flat[idx] = orig + step
            loss_plus, _ = fn(params)
            flat[idx] = orig - step
            loss_minus, _ = fn(params)
            flat[idx] = orig
            fd = (loss_plus - loss_minus) / (2.0 * step)
            a = analytic.reshape(-1)[idx]
            rel = abs(a - fd) / max(abs(a), abs(fd), 1e-6)
            if rel > worst:
                worst = rel
        report[name] = worst
    return report
