"""Time the numba kernels against the pure-numpy fallback.

Run:  python3 benchmarks/bench_kernels.py [--repeats N]

The point of the table: the dynamic programs (pairwise distances, DTW,
discrete Fréchet) are loop-bound and speed up massively under numba, while
the convolutions are already BLAS matmuls in the numpy path and compiled
scalar loops cannot keep up. That asymmetry is why the package routes conv
kernels to numpy_impl unconditionally and only the DP kernels through the
selected backend.
"""

import argparse
import time

import numpy as np

from trajdiff.kernels import numpy_impl

try:
    from trajdiff.kernels import numba_impl
except ImportError:
    numba_impl = None


def timeit(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(name, make_args, repeats):
    args = make_args()
    np_fn = getattr(numpy_impl, name)
    t_np = timeit(lambda: np_fn(*args), repeats)
    if numba_impl is None:
        print(f"{name:20s} numpy {1e3 * t_np:9.3f} ms   numba unavailable")
        return
    nb_fn = getattr(numba_impl, name)
    nb_fn(*args)  # compile outside the timed region
    t_nb = timeit(lambda: nb_fn(*args), repeats)
    ratio = t_np / t_nb
    print(f"{name:20s} numpy {1e3 * t_np:9.3f} ms   numba {1e3 * t_nb:9.3f} ms"
          f"   numpy/numba {ratio:6.2f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=7,
                        help="timing repeats per kernel (best is reported)")
    parser.add_argument("--frames", type=int, default=128,
                        help="sequence length for the conv and DP inputs")
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    n = args.frames

    x = rng.standard_normal((64, n))
    w = rng.standard_normal((64, 64, 5))
    b = rng.standard_normal(64)
    gy = rng.standard_normal((64, n))
    a3 = rng.standard_normal((n, 3))
    b3 = rng.standard_normal((n, 3))

    print(f"frames={n}, repeats={args.repeats}")
    bench("conv1d_forward", lambda: (x, w, b, 1, 2), args.repeats)
    bench("conv1d_input_grad", lambda: (gy, w, 1, 2, n), args.repeats)
    bench("conv1d_param_grad", lambda: (gy, x, 1, 2, 5), args.repeats)
    bench("pairwise_distances", lambda: (a3, b3), args.repeats)
    bench("dtw_cost_path", lambda: (a3, b3), args.repeats)
    bench("frechet_distance", lambda: (a3, b3), args.repeats)


if __name__ == "__main__":
    main()
