"""Process-wide thread-count knob for data-parallel scans.

Queries in the augmentation module are independent, and each query's scan is
a deterministic reduction, so results are identical at any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_thread_count: int | None = None


def set_thread_count(n: int | None) -> None:
    global _thread_count
    if n is not None and n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    _thread_count = n


def get_thread_count() -> int:
    if _thread_count is not None:
        return _thread_count
    return os.cpu_count() or 1


def parallel_map(fn, items: list) -> list:
    """Order-preserving map, threaded when the knob allows it."""
    if get_thread_count() == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(get_thread_count(), len(items))) as pool:
        return list(pool.map(fn, items))
