"""Thread fan-out capped by ``HYSTRELAX_THREADS`` (default 1: run inline)."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("HYSTRELAX_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn, items):
    """Ordered map; results do not depend on the worker count."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
