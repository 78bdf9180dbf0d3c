"""Row-blocked thread parallelism for per-node kernels.

Kernels handed to ``map_rows`` must compute every output row from
read-only inputs, so the result is independent of the worker count.
"""
from concurrent.futures import ThreadPoolExecutor
import contextlib

import numpy as np

_threads = 1


def set_threads(n):
    global _threads
    _threads = max(1, int(n))


def get_threads():
    return _threads


def map_rows(kernel, n_rows, out):
    """Fill ``out[lo:hi]`` with ``kernel(lo, hi)`` over row blocks."""
    n = min(_threads, n_rows)
    if n <= 1:
        out[...] = kernel(0, n_rows)
        return out
    bounds = np.linspace(0, n_rows, n + 1).astype(int)

    def work(k):
        lo, hi = bounds[k], bounds[k + 1]
        out[lo:hi] = kernel(lo, hi)

    with ThreadPoolExecutor(max_workers=n) as ex:
        list(ex.map(work, range(n)))
    return out


@contextlib.contextmanager
def blas_threads(n):
    """Limit BLAS/OpenMP pools while a run is in progress."""
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        yield
        return
    with threadpool_limits(limits=int(n)):
        yield
