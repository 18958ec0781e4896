"""Numba-compiled implementations of the hot kernels.

Same signatures and semantics as numpy_impl. Convolution loops are written so
the innermost work runs over contiguous time slices; the DP kernels avoid
fastmath because they rely on inf sentinels and exact tie comparisons.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def conv1d_forward(x, w, b, stride, pad):
    c_in, t_in = x.shape
    c_out, _, k = w.shape
    xp = np.zeros((c_in, t_in + 2 * pad))
    xp[:, pad : pad + t_in] = x
    t_out = (t_in + 2 * pad - k) // stride + 1
    y = np.empty((c_out, t_out))
    for o in range(c_out):
        row = np.full(t_out, b[o])
        for c in range(c_in):
            xr = xp[c]
            for kk in range(k):
                wv = w[o, c, kk]
                if stride == 1:
                    row += wv * xr[kk : kk + t_out]
                else:
                    row += wv * xr[kk : kk + stride * t_out : stride]
        y[o] = row
    return y


@njit(cache=True, fastmath=True)
def conv1d_input_grad(gy, w, stride, pad, t_in):
    c_out, c_in, k = w.shape
    t_out = gy.shape[1]
    gxp = np.zeros((c_in, t_in + 2 * pad))
    for c in range(c_in):
        row = gxp[c]
        for o in range(c_out):
            gr = gy[o]
            for kk in range(k):
                wv = w[o, c, kk]
                if stride == 1:
                    row[kk : kk + t_out] += wv * gr
                else:
                    row[kk : kk + stride * t_out : stride] += wv * gr
    return gxp[:, pad : pad + t_in]


@njit(cache=True, fastmath=True)
def conv1d_param_grad(gy, x, stride, pad, k):
    c_in, t_in = x.shape
    c_out, t_out = gy.shape
    xp = np.zeros((c_in, t_in + 2 * pad))
    xp[:, pad : pad + t_in] = x
    gw = np.empty((c_out, c_in, k))
    gb = np.zeros(c_out)
    for o in range(c_out):
        gr = gy[o]
        gb[o] = gr.sum()
        for c in range(c_in):
            xr = xp[c]
            for kk in range(k):
                acc = 0.0
                if stride == 1:
                    acc = np.dot(gr, xr[kk : kk + t_out])
                else:
                    for j in range(t_out):
                        acc += gr[j] * xr[kk + stride * j]
                gw[o, c, kk] = acc
    return gw, gb


@njit(cache=True)
def pairwise_distances(a, b):
    n = a.shape[0]
    m = b.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        ax, ay, az = a[i, 0], a[i, 1], a[i, 2]
        for j in range(m):
            dx = ax - b[j, 0]
            dy = ay - b[j, 1]
            dz = az - b[j, 2]
            out[i, j] = np.sqrt(dx * dx + dy * dy + dz * dz)
    return out


@njit(cache=True)
def dtw_cost_path(a, b):
    n = a.shape[0]
    m = b.shape[0]
    d = pairwise_distances(a, b)
    cost = np.full((n + 1, m + 1), np.inf)
    plen = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best_c = cost[i - 1, j]
            best_l = plen[i - 1, j]
            if cost[i - 1, j - 1] < best_c or (
                cost[i - 1, j - 1] == best_c and plen[i - 1, j - 1] < best_l
            ):
                best_c = cost[i - 1, j - 1]
                best_l = plen[i - 1, j - 1]
            if cost[i, j - 1] < best_c or (
                cost[i, j - 1] == best_c and plen[i, j - 1] < best_l
            ):
                best_c = cost[i, j - 1]
                best_l = plen[i, j - 1]
            cost[i, j] = best_c + d[i - 1, j - 1]
            plen[i, j] = best_l + 1
    return cost[n, m], plen[n, m]


@njit(cache=True)
def frechet_distance(a, b):
    n = a.shape[0]
    m = b.shape[0]
    d = pairwise_distances(a, b)
    f = np.empty((n, m))
    f[0, 0] = d[0, 0]
    for j in range(1, m):
        f[0, j] = max(f[0, j - 1], d[0, j])
    for i in range(1, n):
        f[i, 0] = max(f[i - 1, 0], d[i, 0])
        for j in range(1, m):
            prev = min(f[i - 1, j], f[i - 1, j - 1], f[i, j - 1])
            f[i, j] = max(prev, d[i, j])
    return f[n - 1, m - 1]
