"""Pure-numpy implementations of the hot kernels.

Reference implementations and the fallback when numba is unavailable or
disabled via TRAJDIFF_NUMBA=0. Convolutions use im2col + BLAS matmul; the
dynamic programs are plain Python loops over numpy rows, which is slow but
correct.
"""

from __future__ import annotations

import numpy as np


def conv1d_forward(x, w, b, stride, pad):
    """Cross-correlation of x (C_in, T) with w (C_out, C_in, K), zero padding."""
    c_in, t_in = x.shape
    c_out, _, k = w.shape
    xp = np.zeros((c_in, t_in + 2 * pad))
    xp[:, pad : pad + t_in] = x
    t_out = (t_in + 2 * pad - k) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)[:, ::stride][
        :, :t_out
    ]  # (C_in, T_out, K)
    cols = win.transpose(1, 0, 2).reshape(t_out, c_in * k)
    y = cols @ w.reshape(c_out, c_in * k).T
    return np.ascontiguousarray(y.T) + b[:, None]


def conv1d_input_grad(gy, w, stride, pad, t_in):
    """Gradient of conv1d_forward wrt x, given gy (C_out, T_out).

    Computed as a transposed convolution: gy is dilated by the stride, then
    fully correlated with the kernel flipped along its tap axis, which turns
    the scatter into one im2col matmul.
    """
    c_out, c_in, k = w.shape
    t_out = gy.shape[1]
    if stride == 1:
        gyd = gy
    else:
        gyd = np.zeros((c_out, stride * (t_out - 1) + 1))
        gyd[:, ::stride] = gy
    ypad = np.zeros((c_out, gyd.shape[1] + 2 * (k - 1)))
    ypad[:, k - 1 : k - 1 + gyd.shape[1]] = gyd
    win = np.lib.stride_tricks.sliding_window_view(ypad, k, axis=1)
    cols = win.transpose(1, 0, 2).reshape(-1, c_out * k)
    wf = np.ascontiguousarray(w[:, :, ::-1].transpose(1, 0, 2))
    full = (cols @ wf.reshape(c_in, c_out * k).T).T  # (C_in, stride*(T_out-1)+k)
    gxp = np.zeros((c_in, t_in + 2 * pad))
    gxp[:, : full.shape[1]] = full
    return gxp[:, pad : pad + t_in]


def conv1d_param_grad(gy, x, stride, pad, k):
    """Gradients of conv1d_forward wrt w and b."""
    c_in, t_in = x.shape
    c_out, t_out = gy.shape
    xp = np.zeros((c_in, t_in + 2 * pad))
    xp[:, pad : pad + t_in] = x
    pos = stride * np.arange(t_out)
    gw = np.empty((c_out, c_in, k))
    for kk in range(k):
        gw[:, :, kk] = gy @ xp[:, pos + kk].T
    return gw, gy.sum(axis=1)


def pairwise_distances(a, b):
    """Euclidean distance matrix between point sets a (N, 3) and b (M, 3)."""
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("nmk,nmk->nm", diff, diff))


def dtw_cost_path(a, b):
    """Min-cost monotone alignment of two polylines.

    Returns (total_cost, path_length) where path_length is the number of
    aligned pairs on the cheapest path; cost ties prefer the shorter path.
    """
    n, m = len(a), len(b)
    d = pairwise_distances(a, b)
    cost = np.full((n + 1, m + 1), np.inf)
    plen = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[0, 0] = 0.0
    for i in range(1, n + 1):
        ci = cost[i]
        cp = cost[i - 1]
        li = plen[i]
        lp = plen[i - 1]
        for j in range(1, m + 1):
            best_c = cp[j]
            best_l = lp[j]
            if cp[j - 1] < best_c or (cp[j - 1] == best_c and lp[j - 1] < best_l):
                best_c = cp[j - 1]
                best_l = lp[j - 1]
            if ci[j - 1] < best_c or (ci[j - 1] == best_c and li[j - 1] < best_l):
                best_c = ci[j - 1]
                best_l = li[j - 1]
            ci[j] = best_c + d[i - 1, j - 1]
            li[j] = best_l + 1
    return float(cost[n, m]), int(plen[n, m])


def frechet_distance(a, b):
    """Discrete Frechet distance between two polylines."""
    n, m = len(a), len(b)
    d = pairwise_distances(a, b)
    f = np.empty((n, m))
    f[0, 0] = d[0, 0]
    for j in range(1, m):
        f[0, j] = max(f[0, j - 1], d[0, j])
    for i in range(1, n):
        f[i, 0] = max(f[i - 1, 0], d[i, 0])
        for j in range(1, m):
            f[i, j] = max(min(f[i - 1, j], f[i - 1, j - 1], f[i, j - 1]), d[i, j])
    return float(f[n - 1, m - 1])
