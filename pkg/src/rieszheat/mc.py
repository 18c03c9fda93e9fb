"""Parallel Monte Carlo plumbing.

Paths are grouped into fixed-size chunks (CHUNK is a constant, never derived
from the worker count), each chunk is evolved independently on a worker
thread, and results are concatenated in canonical chunk order.  Because a
path's trajectory depends only on its own RNG stream, and reductions walk
chunks in a fixed order, numeric output is bit-identical for any number of
workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

__all__ = ["CHUNK", "worker_count", "map_path_chunks", "pairwise_mean"]

CHUNK = 32
_ENV = "RIESZHEAT_WORKERS"


def worker_count(explicit=None) -> int:
    """Worker threads: explicit argument, else $RIESZHEAT_WORKERS, else 1."""
    if explicit is not None:
        return max(1, int(explicit))
    return max(1, int(os.environ.get(_ENV, "1")))


def path_chunks(n_paths: int):
    return [np.arange(lo, min(lo + CHUNK, n_paths))
            for lo in range(0, n_paths, CHUNK)]


def map_path_chunks(fn, n_paths: int, workers=None):
    """Run ``fn(path_indices)`` over fixed chunks; list in canonical order."""
    chunks = path_chunks(n_paths)
    w = worker_count(workers)
    if w == 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, chunks))


def pairwise_mean(per_path: np.ndarray, axis=0):
    """Mean via numpy's pairwise summation (order-stable reduction)."""
    per_path = np.asarray(per_path)
    return per_path.sum(axis=axis) / per_path.shape[axis]
