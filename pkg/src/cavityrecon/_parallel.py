from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from threadpoolctl import threadpool_limits


def ordered_map(fn, items, threads: int = 1) -> list:
    """Apply ``fn(index, item)`` to every item; results come back in input order.

    BLAS is pinned to one thread so each call does identical arithmetic
    whatever the outer thread count, which keeps results bit-identical.
    """
    items = list(items)
    threads = max(1, int(threads))
    with threadpool_limits(limits=1):
        if threads == 1 or len(items) < 2:
            return [fn(i, item) for i, item in enumerate(items)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(len(items)), items))
