"""Deterministic chunked parallelism.

Work is split into contiguous index chunks; each chunk is computed by the
same vectorized kernel, and results are reassembled in index order, so the
output is bitwise independent of the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np


def chunk_ranges(n_items: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(int(workers), n_items)) if n_items else 1
    bounds = np.linspace(0, n_items, workers + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def run_chunked(fn: Callable[[int, int], np.ndarray], n_items: int, workers: int,
                axis: int = 0) -> np.ndarray:
    """Apply fn(lo, hi) per chunk and concatenate results along `axis`."""
    ranges = chunk_ranges(n_items, workers)
    if len(ranges) == 1:
        return fn(*ranges[0])
    with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
        parts = list(pool.map(lambda r: fn(*r), ranges))
    return np.concatenate(parts, axis=axis)
