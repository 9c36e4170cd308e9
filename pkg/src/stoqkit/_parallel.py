"""Ordered thread-pool map capped by ``STOQKIT_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    raw = os.environ.get("STOQKIT_THREADS", "")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    default = min(8, os.cpu_count() or 1)
    return max(1, cap) if cap > 0 else default


def ordered_map(fn, items, threshold: int = 4):
    """``list(map(fn, items))`` run on the worker pool; result order is input order."""
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) < threshold:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
