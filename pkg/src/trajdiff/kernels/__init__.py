"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is picked once at import time: numba when it imports cleanly,
unless the TRAJDIFF_NUMBA environment variable is set to 0/false/off/no.

Routing is per kernel family. The dynamic programs (DTW, Fréchet) and the
pairwise distance matrix are loop-bound and gain an order of magnitude from
compilation. The convolutions go the other way: the im2col + BLAS matmul in
numpy_impl beats compiled scalar loops several-fold at this package's
channel counts, so conv kernels always use numpy_impl and the numba conv
variants exist for the equivalence tests and the benchmark
(benchmarks/bench_kernels.py shows both effects side by side).
"""

from __future__ import annotations

import os

from . import numpy_impl


def numba_requested() -> bool:
    flag = os.environ.get("TRAJDIFF_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


if numba_requested():
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:
        _impl = numpy_impl
        BACKEND = "numpy"
else:
    _impl = numpy_impl
    BACKEND = "numpy"

conv1d_forward = numpy_impl.conv1d_forward
conv1d_input_grad = numpy_impl.conv1d_input_grad
conv1d_param_grad = numpy_impl.conv1d_param_grad
pairwise_distances = _impl.pairwise_distances
dtw_cost_path = _impl.dtw_cost_path
frechet_distance = _impl.frechet_distance

__all__ = [
    "BACKEND",
    "conv1d_forward",
    "conv1d_input_grad",
    "conv1d_param_grad",
    "pairwise_distances",
    "dtw_cost_path",
    "frechet_distance",
    "numba_requested",
]
