"""Worker-budget plumbing. Results are always returned in input order."""

import os
from concurrent.futures import ThreadPoolExecutor

JOBS_ENV = "ZRKIT_JOBS"


def default_jobs():
    value = os.environ.get(JOBS_ENV, "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def map_ordered(fn, items, jobs=1):
    """``[fn(x) for x in items]``, optionally on a thread pool.

    Each result lands in the slot of its input, so the output never depends
    on scheduling.
    """
    items = list(items)
    if jobs is None:
        jobs = default_jobs()
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def chunked(n, n_chunks):
    """Split ``range(n)`` into at most `n_chunks` contiguous (start, stop) blocks."""
    n_chunks = max(1, min(n_chunks, n))
    bounds = [round(k * n / n_chunks) for k in range(n_chunks + 1)]
    return [(bounds[k], bounds[k + 1]) for k in range(n_chunks) if bounds[k] < bounds[k + 1]]
