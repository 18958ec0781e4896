import itertools

import numpy as np
import pytest

from trajdiff.kernels import (
    BACKEND,
    conv1d_forward,
    conv1d_input_grad,
    conv1d_param_grad,
    dtw_cost_path,
    frechet_distance,
    numba_requested,
    pairwise_distances,
)
from trajdiff.kernels import numpy_impl

try:
    from trajdiff.kernels import numba_impl
except ImportError:
    numba_impl = None


def conv_reference(x, w, b, stride, pad):
    """Direct triple-loop cross-correlation."""
    c_in, t_in = x.shape
    c_out, _, k = w.shape
    xp = np.zeros((c_in, t_in + 2 * pad))
    xp[:, pad : pad + t_in] = x
    t_out = (t_in + 2 * pad - k) // stride + 1
    y = np.zeros((c_out, t_out))
    for o in range(c_out):
        for t in range(t_out):
            s = t * stride
            y[o, t] = np.sum(xp[:, s : s + k] * w[o]) + b[o]
    return y


def random_case(rng):
    c_in = int(rng.integers(1, 6))
    c_out = int(rng.integers(1, 6))
    k = int(rng.integers(1, 6))
    stride = int(rng.integers(1, 4))
    pad = int(rng.integers(0, k))
    t_in = int(rng.integers(k, k + 20))
    x = rng.standard_normal((c_in, t_in))
    w = rng.standard_normal((c_out, c_in, k))
    b = rng.standard_normal(c_out)
    return x, w, b, stride, pad


def test_conv1d_forward_matches_reference():
    rng = np.random.default_rng(0)
    for _ in range(30):
        x, w, b, stride, pad = random_case(rng)
        got = conv1d_forward(x, w, b, stride, pad)
        ref = conv_reference(x, w, b, stride, pad)
        assert got.shape == ref.shape
        assert np.allclose(got, ref, atol=1e-12)


def test_conv1d_input_grad_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(10):
        x, w, b, stride, pad = random_case(rng)
        y = conv1d_forward(x, w, b, stride, pad)
        gy = rng.standard_normal(y.shape)
        gx = conv1d_input_grad(gy, w, stride, pad, x.shape[1])
        assert gx.shape == x.shape
        h = 1e-6
        for _ in range(5):
            i = int(rng.integers(x.shape[0]))
            j = int(rng.integers(x.shape[1]))
            xp = x.copy()
            xp[i, j] += h
            xm = x.copy()
            xm[i, j] -= h
            fd = np.sum(
                gy * (conv1d_forward(xp, w, b, stride, pad) - conv1d_forward(xm, w, b, stride, pad))
            ) / (2.0 * h)
            assert gx[i, j] == pytest.approx(fd, abs=1e-6)


def test_conv1d_param_grad_finite_differences():
    rng = np.random.default_rng(2)
    for _ in range(10):
        x, w, b, stride, pad = random_case(rng)
        y = conv1d_forward(x, w, b, stride, pad)
        gy = rng.standard_normal(y.shape)
        gw, gb = conv1d_param_grad(gy, x, stride, pad, w.shape[2])
        assert gw.shape == w.shape and gb.shape == (w.shape[0],)
        h = 1e-6
        for _ in range(5):
            o = int(rng.integers(w.shape[0]))
            i = int(rng.integers(w.shape[1]))
            kk = int(rng.integers(w.shape[2]))
            wp = w.copy()
            wp[o, i, kk] += h
            wm = w.copy()
            wm[o, i, kk] -= h
            fd = np.sum(
                gy * (conv1d_forward(x, wp, b, stride, pad) - conv1d_forward(x, wm, b, stride, pad))
            ) / (2.0 * h)
            assert gw[o, i, kk] == pytest.approx(fd, abs=1e-6)
        assert np.allclose(gb, gy.sum(axis=1), atol=1e-12)


@pytest.mark.skipif(numba_impl is None, reason="numba not importable")
def test_conv_kernels_numba_matches_numpy():
    rng = np.random.default_rng(3)
    for _ in range(12):
        x, w, b, stride, pad = random_case(rng)
        y_np = numpy_impl.conv1d_forward(x, w, b, stride, pad)
        y_nb = numba_impl.conv1d_forward(x, w, b, stride, pad)
        assert np.allclose(y_np, y_nb, atol=1e-12)
        gy = rng.standard_normal(y_np.shape)
        gx_np = numpy_impl.conv1d_input_grad(gy, w, stride, pad, x.shape[1])
        gx_nb = numba_impl.conv1d_input_grad(gy, w, stride, pad, x.shape[1])
        assert np.allclose(gx_np, gx_nb, atol=1e-12)
        gw_np, gb_np = numpy_impl.conv1d_param_grad(gy, x, stride, pad, w.shape[2])
        gw_nb, gb_nb = numba_impl.conv1d_param_grad(gy, x, stride, pad, w.shape[2])
        assert np.allclose(gw_np, gw_nb, atol=1e-12)
        assert np.allclose(gb_np, gb_nb, atol=1e-12)


@pytest.mark.skipif(numba_impl is None, reason="numba not importable")
def test_dp_kernels_numba_matches_numpy():
    rng = np.random.default_rng(4)
    for _ in range(8):
        a = rng.standard_normal((int(rng.integers(2, 25)), 3))
        b = rng.standard_normal((int(rng.integers(2, 25)), 3))
        assert np.allclose(
            numpy_impl.pairwise_distances(a, b), numba_impl.pairwise_distances(a, b),
            atol=1e-12,
        )
        c_np, l_np = numpy_impl.dtw_cost_path(a, b)
        c_nb, l_nb = numba_impl.dtw_cost_path(a, b)
        assert c_np == pytest.approx(c_nb, abs=1e-10)
        assert l_np == l_nb
        assert numpy_impl.frechet_distance(a, b) == pytest.approx(
            numba_impl.frechet_distance(a, b), abs=1e-10
        )


def test_pairwise_distances_known():
    a = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    b = np.array([[0.0, 3.0, 4.0]])
    d = pairwise_distances(a, b)
    assert d.shape == (2, 1)
    assert d[0, 0] == pytest.approx(5.0)
    assert d[1, 0] == pytest.approx(np.sqrt(26.0))


def enumerate_dtw(d):
    """Brute-force cheapest monotone alignment over all lattice paths."""
    n, m = d.shape
    best = {}

    def walk(i, j, cost, length):
        cost = cost + d[i, j]
        length += 1
        if (i, j) == (n - 1, m - 1):
            key = (cost, length)
            cur = best.get("end")
            if cur is None or key < cur:
                best["end"] = key
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            ni, nj = i + di, j + dj
            if ni < n and nj < m:
                walk(ni, nj, cost, length)

    walk(0, 0, 0.0, 0)
    return best["end"]


def test_dtw_matches_path_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(12):
        a = rng.standard_normal((int(rng.integers(2, 6)), 3))
        b = rng.standard_normal((int(rng.integers(2, 6)), 3))
        cost, length = dtw_cost_path(a, b)
        ref_cost, ref_len = enumerate_dtw(pairwise_distances(a, b))
        assert cost == pytest.approx(ref_cost, abs=1e-10)
        assert length == ref_len


def test_dtw_identical_inputs():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((10, 3))
    cost, length = dtw_cost_path(a, a)
    assert cost == pytest.approx(0.0, abs=1e-12)
    assert length == 10


def enumerate_frechet(d):
    """Brute-force min over all monotone paths of the max distance."""
    n, m = d.shape
    best = [np.inf]

    def walk(i, j, cur):
        cur = max(cur, d[i, j])
        if cur >= best[0]:
            return
        if (i, j) == (n - 1, m - 1):
            best[0] = cur
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            ni, nj = i + di, j + dj
            if ni < n and nj < m:
                walk(ni, nj, cur)

    walk(0, 0, 0.0)
    return best[0]


def test_frechet_matches_path_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(12):
        a = rng.standard_normal((int(rng.integers(2, 7)), 3))
        b = rng.standard_normal((int(rng.integers(2, 7)), 3))
        got = frechet_distance(a, b)
        ref = enumerate_frechet(pairwise_distances(a, b))
        assert got == pytest.approx(ref, abs=1e-10)


def test_frechet_known_offset_lines():
    # parallel lines at constant offset: the leash never exceeds the offset
    t = np.linspace(0.0, 1.0, 9)
    a = np.stack([t, np.zeros(9), np.zeros(9)], axis=1)
    b = a + np.array([0.0, 0.25, 0.0])
    assert frechet_distance(a, b) == pytest.approx(0.25, abs=1e-12)


def test_backend_constant_consistent():
    assert BACKEND in ("numba", "numpy")
    if BACKEND == "numba":
        assert numba_requested() and numba_impl is not None
