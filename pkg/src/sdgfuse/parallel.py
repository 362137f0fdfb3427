"""Row-tiled worker pool.

Kernels compute each output pixel independently of the tile it belongs to,
so any thread count gives byte-identical results.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_threads = 1


def set_threads(n: int | None) -> None:
    global _threads
    if n is None or n <= 0:
        n = os.cpu_count() or 1
    _threads = int(n)


def get_threads() -> int:
    return _threads


def row_tiles(h: int, n: int) -> list[tuple[int, int]]:
    n = max(1, min(n, h))
    bounds = np.linspace(0, h, n + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def map_rows(fn, h: int, threads: int | None = None):
    """Call ``fn(row0, row1)`` per tile and concatenate along axis 0.

    ``fn`` may return an array or a tuple of arrays.
    """
    threads = threads or _threads
    tiles = row_tiles(h, threads)
    if len(tiles) == 1:
        return fn(0, h)
    with ThreadPoolExecutor(max_workers=len(tiles)) as pool:
        parts = list(pool.map(lambda t: fn(*t), tiles))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p, axis=0) for p in zip(*parts))
    return np.concatenate(parts, axis=0)


def map_tasks(fn, items, threads: int | None = None) -> list:
    """Ordered map over independent tasks."""
    threads = threads or _threads
    items = list(items)
    if threads == 1 or len(items) == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
