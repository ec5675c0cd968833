"""Row-partitioned census execution.

The row range is always cut into the same fixed partitions, whatever the
worker count, and partial counts are summed in partition order, so results
do not depend on ``threads``.  Workers are forked processes that inherit the
read-only census data through the module global ``WORK``.
"""

from __future__ import annotations

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor

PARTITIONS = 16
WORK: dict = {}


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1


def partitions(n: int, parts: int = PARTITIONS) -> list[range]:
    step = -(-n // parts) if n else 1
    return [range(s, min(s + step, n)) for s in range(0, n, step)]


def _add(x, y):
    if isinstance(x, tuple):
        return tuple(a + b for a, b in zip(x, y))
    return x + y


def map_rows(func, n: int, work: dict, threads: int = 1):
    """Apply ``func(rows)`` over fixed partitions of ``range(n)`` and sum."""
    global WORK
    WORK = work
    try:
        parts = partitions(n)
        if threads > 1 and len(parts) > 1:
            ctx = mp.get_context("fork")
            with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as ex:
                results = list(ex.map(func, parts))
        else:
            results = [func(p) for p in parts]
    finally:
        WORK = {}
    out = results[0]
    for r in results[1:]:
        out = _add(out, r)
    return out
