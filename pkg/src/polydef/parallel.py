"""Deterministic worker-pool helper.

Parallel stages map a pure function over items and reassemble results in
input order, so any worker count produces output identical to jobs=1.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def map_ordered(fn, items, jobs: int = 1) -> list:
    """Apply `fn` to each item; results come back in input order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
