"""Worker-count resolution and order-preserving parallel map.

The BELLINT_THREADS environment variable caps parallelism for optimizer
starts, sweep cells and simulation batches; 0 or unset means auto (one
worker per CPU).  Results are always reduced in submission order, so the
output is identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "BELLINT_THREADS"


def worker_count(limit: int | None = None) -> int:
    raw = os.environ.get(ENV_VAR, "0")
    try:
        requested = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be an integer, got {raw!r}")
    if requested < 0:
        raise ValueError(f"{ENV_VAR} must be >= 0, got {requested}")
    workers = requested if requested > 0 else (os.cpu_count() or 1)
    if limit is not None:
        workers = min(workers, limit)
    return max(workers, 1)


def map_ordered(fn, items, workers: int | None = None) -> list:
    """Apply fn to items, preserving order; scheduling never affects results."""
    items = list(items)
    if workers is None:
        workers = worker_count(limit=len(items))
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
