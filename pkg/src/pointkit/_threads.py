"""Thread-count control shared by the parallel kernels."""

import contextlib
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_VAR = "POINTKIT_NUM_THREADS"

_override = None


def get_num_threads():
    if _override is not None:
        return _override
    env = os.environ.get(ENV_VAR)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{ENV_VAR} must be a positive integer, got {env!r}") from None
        if n >= 1:
            return n
    return os.cpu_count() or 1


def set_num_threads(n):
    """Set the process-wide thread count. ``None`` restores the default."""
    global _override
    if n is not None and int(n) < 1:
        raise ValueError("thread count must be >= 1")
    _override = None if n is None else int(n)


@contextlib.contextmanager
def num_threads(n):
    global _override
    old = _override
    set_num_threads(n)
    try:
        yield
    finally:
        _override = old


def chunk_bounds(n, parts):
    edges = np.linspace(0, n, max(1, parts) + 1).astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def parallel_chunks(func, n, threads=None, min_chunk=4096):
    """Run ``func(start, stop)`` over ``[0, n)`` split into contiguous chunks.

    Results come back in chunk order, so concatenation is independent of
    scheduling.
    """
    threads = get_num_threads() if threads is None else threads
    parts = min(threads, max(1, n // min_chunk))
    bounds = chunk_bounds(n, parts)
    if len(bounds) <= 1:
        return [func(0, n)] if n > 0 else []
    with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
        return list(pool.map(lambda ab: func(*ab), bounds))
